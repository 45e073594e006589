#include "swd/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "swd/errors.hpp"
#include "swd/utf8.hpp"

namespace swd {

using nlohmann::json;
using nlohmann::ordered_json;

std::string vocab_fingerprint(const Vocab& vocab) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& t : vocab.tokens()) {
    for (unsigned char c : t) mix(c);
    mix('\n');
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

ordered_json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["max_sentences"] = c.max_sentences;
  j["position_embed_dim"] = c.position_embed_dim;
  j["mlp_hidden_dim"] = c.mlp_hidden_dim;
  j["attention"] = c.attention;
  j["swd"] = c.swd;
  j["detach_weights"] = c.detach_weights;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.max_sentences = j.at("max_sentences").get<std::size_t>();
  c.position_embed_dim = j.at("position_embed_dim").get<std::size_t>();
  c.mlp_hidden_dim = j.at("mlp_hidden_dim").get<std::size_t>();
  c.attention = j.at("attention").get<bool>();
  c.swd = j.at("swd").get<bool>();
  c.detach_weights = j.at("detach_weights").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

ordered_json corpus_to_json(const CorpusOptions& o) {
  ordered_json j;
  j["max_sentences"] = o.max_sentences;
  j["max_sentence_len"] = o.max_sentence_len;
  j["max_summary_len"] = o.max_summary_len;
  j["min_count"] = o.min_count;
  j["tokenization"] = o.tokenization == Tokenization::kChar ? "char" : "word";
  j["delimiters"] = utf8::encode(o.delimiters);
  return j;
}

CorpusOptions corpus_from_json(const json& j) {
  CorpusOptions o;
  o.max_sentences = j.at("max_sentences").get<std::size_t>();
  o.max_sentence_len = j.at("max_sentence_len").get<std::size_t>();
  o.max_summary_len = j.at("max_summary_len").get<std::size_t>();
  o.min_count = j.at("min_count").get<std::size_t>();
  const auto tok = j.at("tokenization").get<std::string>();
  if (tok == "char") {
    o.tokenization = Tokenization::kChar;
  } else if (tok == "word") {
    o.tokenization = Tokenization::kWord;
  } else {
    throw FormatError("unknown tokenization '" + tok + "'");
  }
  o.delimiters = utf8::decode(j.at("delimiters").get<std::string>());
  return o;
}

std::vector<Parameter> params_from_json(const ModelConfig& config, const json& j) {
  if (!j.is_object()) throw FormatError("\"params\" must be an object");
  const ParamLayout layout = ModelParams::layout(config);
  std::vector<Parameter> arrays;
  arrays.reserve(layout.size());
  for (const auto& [name, shape] : layout) {
    auto it = j.find(name);
    if (it == j.end()) throw FormatError("checkpoint is missing array '" + name + "'");
    Shape declared;
    try {
      declared = it->at("shape").get<Shape>();
    } catch (const json::exception&) {
      throw FormatError("array '" + name + "' has no valid shape");
    }
    if (declared != shape) {
      throw FormatError("array '" + name + "' declares shape " + shape_string(declared) +
                        " but the model configuration requires " + shape_string(shape));
    }
    std::vector<double> data;
    try {
      data = it->at("data").get<std::vector<double>>();
    } catch (const json::exception&) {
      throw FormatError("array '" + name + "' has no valid data");
    }
    if (data.size() != shape_numel(shape)) {
      throw FormatError("array '" + name + "' holds " + std::to_string(data.size()) + " values for shape " +
                        shape_string(shape));
    }
    Parameter p;
    p.name = name;
    p.value = Tensor(shape, std::move(data));
    p.grad = Tensor(shape);
    arrays.push_back(std::move(p));
  }
  if (j.size() != layout.size()) {
    for (const auto& [name, value] : j.items()) {
      bool known = false;
      for (const auto& entry : layout) known = known || entry.first == name;
      if (!known) throw FormatError("checkpoint has unexpected array '" + name + "'");
    }
  }
  return arrays;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  ordered_json j;
  j["format_version"] = 1;
  j["model_config"] = config_to_json(checkpoint.model);
  j["vocab_path"] = checkpoint.vocab_path;
  ordered_json params = ordered_json::object();
  for (const auto& p : checkpoint.params.all()) {
    ordered_json a;
    a["shape"] = p.value.shape();
    const auto v = p.value.values();
    a["data"] = std::vector<double>(v.begin(), v.end());
    params[p.name] = std::move(a);
  }
  j["params"] = std::move(params);
  ordered_json meta;
  meta["step"] = checkpoint.meta.step;
  meta["epoch"] = checkpoint.meta.epoch;
  meta["seed"] = checkpoint.meta.seed;
  meta["loss_history"] = checkpoint.meta.loss_history;
  meta["tag"] = checkpoint.meta.tag;
  meta["vocab_fingerprint"] = checkpoint.meta.vocab_fingerprint;
  meta["corpus"] = corpus_to_json(checkpoint.meta.corpus);
  j["meta"] = std::move(meta);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw FormatError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string where = path.string() + ": ";
  try {
    const json j = json::parse(buf.str());
    if (!j.is_object()) throw FormatError("not a JSON object");
    const int version = j.at("format_version").get<int>();
    if (version != 1) throw FormatError("unsupported format_version " + std::to_string(version));
    Checkpoint c;
    c.model = config_from_json(j.at("model_config"));
    c.model.validate();
    c.vocab_path = j.at("vocab_path").get<std::string>();
    c.params = ModelParams::from_arrays(c.model, params_from_json(c.model, j.at("params")));
    const json& meta = j.at("meta");
    c.meta.step = meta.at("step").get<std::size_t>();
    c.meta.epoch = meta.at("epoch").get<std::size_t>();
    c.meta.seed = meta.at("seed").get<std::uint64_t>();
    c.meta.loss_history = meta.at("loss_history").get<std::vector<double>>();
    c.meta.tag = meta.at("tag").get<std::string>();
    c.meta.vocab_fingerprint = meta.at("vocab_fingerprint").get<std::string>();
    c.meta.corpus = corpus_from_json(meta.at("corpus"));
    return c;
  } catch (const json::exception& e) {
    throw FormatError(where + "malformed checkpoint: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(where + "invalid model configuration: " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  }
}

std::filesystem::path resolve_vocab_path(const Checkpoint& checkpoint,
                                         const std::filesystem::path& checkpoint_path) {
  std::filesystem::path p(checkpoint.vocab_path);
  if (p.is_absolute()) return p;
  return checkpoint_path.parent_path() / p;
}

}  // namespace swd
