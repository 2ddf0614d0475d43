#include "dapt/text.hpp"

#include <unicode/uchar.h>
#include <unicode/unorm2.h>
#include <unicode/ustring.h>
#include <unicode/utf16.h>

#include <vector>

#include "dapt/common.hpp"

namespace dapt {

namespace {

std::vector<UChar> to_utf16(std::string_view raw) {
  std::vector<UChar> buf(raw.size() + 1);
  int32_t len = 0;
  UErrorCode status = U_ZERO_ERROR;
  u_strFromUTF8WithSub(buf.data(), static_cast<int32_t>(buf.size()), &len,
                       raw.data(), static_cast<int32_t>(raw.size()), 0xFFFD,
                       nullptr, &status);
  if (U_FAILURE(status)) fail("utf-8 decode failed: ", u_errorName(status));
  buf.resize(static_cast<size_t>(len));
  return buf;
}

std::vector<UChar> nfc(const std::vector<UChar>& in) {
  UErrorCode status = U_ZERO_ERROR;
  const UNormalizer2* norm = unorm2_getNFCInstance(&status);
  if (U_FAILURE(status)) fail("NFC normalizer unavailable: ", u_errorName(status));
  std::vector<UChar> out(in.size() * 3 + 16);
  int32_t len = unorm2_normalize(norm, in.data(), static_cast<int32_t>(in.size()),
                                 out.data(), static_cast<int32_t>(out.size()), &status);
  if (status == U_BUFFER_OVERFLOW_ERROR) {
    status = U_ZERO_ERROR;
    out.resize(static_cast<size_t>(len));
    len = unorm2_normalize(norm, in.data(), static_cast<int32_t>(in.size()),
                           out.data(), static_cast<int32_t>(out.size()), &status);
  }
  if (U_FAILURE(status)) fail("NFC normalization failed: ", u_errorName(status));
  out.resize(static_cast<size_t>(len));
  return out;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  if (raw.empty()) return {};
  const std::vector<UChar> normalized = nfc(to_utf16(raw));

  // Whitespace (including the whitespace control characters \t \n \r) acts as
  // a separator; other control/format characters are dropped outright.
  std::vector<UChar> kept;
  kept.reserve(normalized.size());
  bool pending_space = false;
  bool any_output = false;
  int32_t i = 0;
  const int32_t n = static_cast<int32_t>(normalized.size());
  while (i < n) {
    UChar32 cp;
    U16_NEXT(normalized.data(), i, n, cp);
    if (u_isUWhiteSpace(cp)) {
      pending_space = any_output;
      continue;
    }
    const int8_t cat = u_charType(cp);
    if (cat == U_CONTROL_CHAR || cat == U_FORMAT_CHAR) continue;
    if (pending_space) {
      kept.push_back(u' ');
      pending_space = false;
    }
    UChar units[2];
    int32_t m = 0;
    UBool err = false;
    U16_APPEND(units, m, 2, cp, err);
    if (!err) kept.insert(kept.end(), units, units + m);
    any_output = true;
  }

  if (kept.empty()) return {};
  std::string result(kept.size() * 4 + 1, '\0');
  int32_t out_len = 0;
  UErrorCode status = U_ZERO_ERROR;
  u_strToUTF8(result.data(), static_cast<int32_t>(result.size()), &out_len,
              kept.data(), static_cast<int32_t>(kept.size()), &status);
  if (U_FAILURE(status)) fail("utf-8 encode failed: ", u_errorName(status));
  result.resize(static_cast<size_t>(out_len));
  return result;
}

}  // namespace dapt
