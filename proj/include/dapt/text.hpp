#pragma once

#include <string>
#include <string_view>

namespace dapt {

// Canonical text cleanup applied to every document on ingest:
// NFC normalization, non-whitespace control characters dropped, whitespace
// runs collapsed to single ASCII spaces, ends trimmed. Idempotent.
// Invalid UTF-8 bytes are replaced with U+FFFD before normalization.
std::string clean_text(std::string_view raw);

}  // namespace dapt
