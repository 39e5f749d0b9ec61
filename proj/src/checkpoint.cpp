#include "polyode/models.hpp"
#include "polyode/ode.hpp"

#include <json.hpp>

#include <stdexcept>

namespace polyode {

using nlohmann::json;

namespace {

json params_to_json(const ParamSet& params) {
  json out = json::object();
  for (const auto& p : params) out[p.name] = {{"shape", p.shape}, {"data", p.data}};
  return out;
}

// Fills a freshly built architecture from the stored values.
void fill_params(ParamSet& params, const json& stored) {
  if (!stored.is_object()) throw std::runtime_error("checkpoint: 'params' must be an object");
  if (stored.size() != params.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(params.size()) + " parameters, found " +
                             std::to_string(stored.size()));
  }
  for (auto& p : params) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw std::runtime_error("checkpoint: missing parameter " + p.name);
    const auto shape = it->at("shape").get<Shape>();
    if (shape != p.shape) {
      throw std::runtime_error("checkpoint: parameter " + p.name + " has shape " + shape_string(shape) +
                               ", architecture expects " + shape_string(p.shape));
    }
    auto data = it->at("data").get<std::vector<double>>();
    if (data.size() != p.data.size()) throw std::runtime_error("checkpoint: parameter " + p.name + " size mismatch");
    p.data = std::move(data);
  }
}

}  // namespace

std::string checkpoint_to_json(const Network& net) {
  json j;
  j["arch_kind"] = arch_kind(net);
  j["input_dim"] = input_dim(net);
  j["output_dim"] = output_dim(net);
  if (const auto* p = std::get_if<PiNetV1>(&net)) {
    j["degree"] = p->degree;
    j["hidden_width"] = p->hidden_width;
  } else {
    const auto& m = std::get<MlpNet>(net);
    j["widths"] = m.widths;
    j["activation"] = to_string(m.activation);
  }
  j["params"] = params_to_json(params_of(net));
  return j.dump(1) + "\n";
}

Network checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    const auto kind = j.at("arch_kind").get<std::string>();
    const auto in = j.at("input_dim").get<std::size_t>();
    const auto out = j.at("output_dim").get<std::size_t>();
    if (kind == "pinet") {
      auto net = PiNetV1::zeros(in, out, j.at("degree").get<std::size_t>(), j.at("hidden_width").get<std::size_t>());
      fill_params(net.params, j.at("params"));
      return net;
    }
    if (kind == "mlp") {
      auto net = MlpNet::zeros(j.at("widths").get<std::vector<std::size_t>>(),
                               parse_activation(j.at("activation").get<std::string>()));
      if (net.input_dim() != in || net.output_dim() != out) {
        throw std::runtime_error("checkpoint: widths disagree with input_dim/output_dim");
      }
      fill_params(net.params, j.at("params"));
      return net;
    }
    throw std::runtime_error("checkpoint: unknown arch_kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed field: ") + e.what());
  }
}

void save_checkpoint(const Network& net, const std::string& path) { write_text_file(path, checkpoint_to_json(net)); }

Network load_checkpoint(const std::string& path) { return checkpoint_from_json(read_text_file(path)); }

}  // namespace polyode
