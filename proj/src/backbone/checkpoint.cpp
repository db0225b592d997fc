#include "ladapt/backbone/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

namespace ladapt {

using nlohmann::json;

namespace {

json config_to_json(const BackboneConfig& c) {
  return {{"num_layers", c.num_layers}, {"d_model", c.d_model},   {"num_heads", c.num_heads},
          {"d_ffn", c.d_ffn},           {"input_dim", c.input_dim}, {"max_seq_len", c.max_seq_len},
          {"ffn_activation", to_string(c.ffn_activation)},        {"ln_eps", c.ln_eps}};
}

BackboneConfig config_from_json(const json& j) {
  BackboneConfig c;
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.d_ffn = j.at("d_ffn").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.ffn_activation = activation_from_string(j.at("ffn_activation").get<std::string>());
  c.ln_eps = j.at("ln_eps").get<double>();
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  json params = json::object();
  for (const auto& [name, tensor] : checkpoint.parameters) {
    params[name] = {{"shape", tensor.shape()}, {"values", tensor.storage()}};
  }
  json doc = {{"format", "ladapt-checkpoint"},
              {"version", kCheckpointVersion},
              {"config", config_to_json(checkpoint.config)},
              {"parameters", std::move(params)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << doc.dump();
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.contains("version")) throw ConfigError("checkpoint has no version field");
  if (doc["version"].get<int>() != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + doc["version"].dump());
  }
  try {
    Checkpoint ck;
    ck.config = config_from_json(doc.at("config"));
    for (const auto& [name, entry] : doc.at("parameters").items()) {
      Shape shape = entry.at("shape").get<Shape>();
      std::vector<double> values = entry.at("values").get<std::vector<double>>();
      if (values.size() != shape_numel(shape)) {
        throw ConfigError("parameter '" + name + "' has " + std::to_string(values.size()) +
                          " values for shape " + shape_str(shape));
      }
      ck.parameters.emplace(name, Tensor<double>(std::move(shape), std::move(values)));
    }
    return ck;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace ladapt
