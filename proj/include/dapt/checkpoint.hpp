#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "dapt/model.hpp"
#include "json.hpp"

namespace dapt {

// Self-describing binary container: magic, JSON header (config, head layout,
// vocabulary reference, tensor directory), then raw row-major payloads.
// Loading rebuilds the model skeleton from the header and overwrites every
// tensor, so save -> load -> save is byte-identical.
inline constexpr char kCheckpointMagic[8] = {'D', 'B', 'C', 'K',
                                             '0', '0', '0', '1'};

namespace detail {

inline nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size},   {"max_seq_len", c.max_seq_len},
          {"num_layers", c.num_layers},   {"num_heads", c.num_heads},
          {"hidden_dim", c.hidden_dim},   {"ffn_dim", c.ffn_dim},
          {"dropout_rate", c.dropout_rate}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  return c;
}

template <class S>
const char* dtype_name() {
  return sizeof(S) == 4 ? "f32" : "f64";
}

}  // namespace detail

template <class S>
void save_checkpoint(const Model<S>& m, const std::filesystem::path& path,
                     long long step, const std::string& vocab_ref = {},
                     uint64_t vocab_hash = 0) {
  nlohmann::json header;
  header["dtype"] = detail::dtype_name<S>();
  header["step"] = step;
  header["init_seed"] = m.init_seed;
  header["vocab_ref"] = vocab_ref;
  header["vocab_hash"] = vocab_hash;
  header["encoder"] = detail::encoder_config_to_json(m.config());
  if (m.encoder.adapter_config())
    header["adapter"] = {{"bottleneck_dim", m.encoder.adapter_config()->bottleneck_dim}};
  if (m.mlm) header["mlm_head"] = {{"tied", m.mlm->tied}};
  if (m.classifier)
    header["classifier_head"] = {{"num_labels", m.classifier->num_labels}};
  if (m.retrieval)
    header["retrieval_heads"] = {{"shared_dim", m.retrieval->shared_dim}};

  nlohmann::json tensors = nlohmann::json::array();
  uint64_t offset = 0;
  for (int i = 0; i < m.store.size(); ++i) {
    const Param<S>& p = m.store[i];
    tensors.push_back({{"name", p.name},
                       {"group", to_string(p.group)},
                       {"layer_norm", p.is_layer_norm},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"offset", offset}});
    offset += static_cast<uint64_t>(p.value.size()) * sizeof(S);
  }
  header["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write checkpoint ", path.string());
  const std::string header_str = header.dump();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (int i = 0; i < m.store.size(); ++i) {
    const Param<S>& p = m.store[i];
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(S)));
  }
  require(out.good(), "short write on checkpoint ", path.string());
}

inline nlohmann::json read_checkpoint_header(const std::filesystem::path& path,
                                             std::ifstream* keep_open = nullptr) {
  std::ifstream local;
  std::ifstream& in = keep_open ? *keep_open : local;
  in.open(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint ", path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          path.string(), " is not a checkpoint file");
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  require(in.good(), "truncated checkpoint header in ", path.string());
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  require(in.good(), "truncated checkpoint header in ", path.string());
  return nlohmann::json::parse(header_str);
}

inline std::string checkpoint_dtype(const std::filesystem::path& path) {
  return read_checkpoint_header(path).at("dtype").get<std::string>();
}

template <class S>
struct LoadedCheckpoint {
  Model<S> model;
  long long step = 0;
  std::string vocab_ref;
  uint64_t vocab_hash = 0;
};

template <class S>
LoadedCheckpoint<S> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in;
  const nlohmann::json header = read_checkpoint_header(path, &in);
  require(header.at("dtype").get<std::string>() == detail::dtype_name<S>(),
          "checkpoint ", path.string(), " stores ",
          header.at("dtype").get<std::string>(), " tensors, requested ",
          detail::dtype_name<S>());

  LoadedCheckpoint<S> result;
  result.step = header.at("step").get<long long>();
  result.vocab_ref = header.value("vocab_ref", std::string{});
  result.vocab_hash = header.value("vocab_hash", uint64_t{0});

  const EncoderConfig cfg =
      detail::encoder_config_from_json(header.at("encoder"));
  result.model = init_model<S>(cfg, header.at("init_seed").get<uint64_t>());
  if (header.contains("adapter")) {
    AdapterConfig acfg;
    acfg.bottleneck_dim = header.at("adapter").at("bottleneck_dim").get<int>();
    insert_adapters(result.model, acfg);
  }
  if (header.contains("mlm_head"))
    attach_mlm_head(result.model, header.at("mlm_head").at("tied").get<bool>());
  if (header.contains("classifier_head"))
    attach_classifier_head(
        result.model, header.at("classifier_head").at("num_labels").get<int>());
  if (header.contains("retrieval_heads"))
    attach_retrieval_heads(
        result.model, header.at("retrieval_heads").at("shared_dim").get<int>());

  const auto& tensors = header.at("tensors");
  require(static_cast<int>(tensors.size()) == result.model.store.size(),
          "checkpoint tensor count ", tensors.size(), " != expected ",
          result.model.store.size());
  for (const auto& entry : tensors) {
    const std::string name = entry.at("name").get<std::string>();
    const int id = result.model.store.find(name);
    require(id >= 0, "checkpoint tensor '", name, "' not present in model");
    Param<S>& p = result.model.store[id];
    require(p.value.rows() == entry.at("rows").get<Eigen::Index>() &&
                p.value.cols() == entry.at("cols").get<Eigen::Index>(),
            "shape mismatch for tensor '", name, "'");
    require(to_string(p.group) == entry.at("group").get<std::string>(),
            "group mismatch for tensor '", name, "'");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(S)));
    require(in.good(), "truncated checkpoint payload at tensor '", name, "'");
  }
  return result;
}

// Copies every base-group tensor (the encoder proper) from src into dst.
// Both models must share an encoder configuration; heads are untouched.
template <class S>
void copy_base_parameters(Model<S>& dst, const Model<S>& src) {
  for (int i = 0; i < src.store.size(); ++i) {
    const Param<S>& p = src.store[i];
    if (p.group != ParamGroup::kBase) continue;
    const int id = dst.store.find(p.name);
    require(id >= 0, "destination model lacks tensor '", p.name, "'");
    require(dst.store[id].value.rows() == p.value.rows() &&
                dst.store[id].value.cols() == p.value.cols(),
            "shape mismatch copying '", p.name, "'");
    dst.store[id].value = p.value;
  }
}

}  // namespace dapt
