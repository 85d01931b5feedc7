#pragma once
// JSON snapshots of model parameters. A snapshot stores, per map, a shape
// header (kind, in/out dims, parameter count) plus the flat parameter vector;
// loading verifies the header against the receiving stack before overwriting.
// Finite doubles round-trip exactly through the 17-digit serialization.

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sideinfo/model.hpp"

namespace sideinfo {

inline const char* map_kind_name(MapKind k) {
  switch (k) {
    case MapKind::linear: return "linear";
    case MapKind::logistic: return "logistic";
    case MapKind::mlp: return "mlp";
  }
  throw std::logic_error("unknown map kind");
}

namespace detail {

inline nlohmann::json map_to_json(const Map& m) {
  nlohmann::json j;
  j["kind"] = map_kind_name(m.kind());
  j["in"] = m.in_dim();
  j["out"] = m.out_dim();
  j["params"] = m.params();
  return j;
}

inline void map_from_json(Map& m, const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != map_kind_name(m.kind()))
    throw std::runtime_error("snapshot kind mismatch: expected " +
                             std::string(map_kind_name(m.kind())) + ", got " +
                             j.at("kind").get<std::string>());
  if (j.at("in").get<std::size_t>() != m.in_dim() ||
      j.at("out").get<std::size_t>() != m.out_dim())
    throw std::runtime_error("snapshot dimension mismatch");
  const Vec p = j.at("params").get<Vec>();
  if (p.size() != m.param_count())
    throw std::runtime_error("snapshot parameter count mismatch");
  m.set_params(p.data());
}

}  // namespace detail

inline nlohmann::json model_to_json(const ModelStack& stack) {
  nlohmann::json j;
  j["format"] = "sideinfo-model-v1";
  j["phi"] = detail::map_to_json(*stack.phi);
  j["psi"] = detail::map_to_json(*stack.psi);
  j["beta"] = stack.beta ? detail::map_to_json(*stack.beta) : nlohmann::json(nullptr);
  return j;
}

inline void model_from_json(ModelStack& stack, const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != "sideinfo-model-v1")
    throw std::runtime_error("unrecognized model snapshot format");
  detail::map_from_json(*stack.phi, j.at("phi"));
  detail::map_from_json(*stack.psi, j.at("psi"));
  const nlohmann::json& b = j.at("beta");
  if (stack.beta && b.is_null())
    throw std::runtime_error("snapshot lacks auxiliary map parameters");
  if (!stack.beta && !b.is_null())
    throw std::runtime_error("snapshot carries auxiliary map the stack lacks");
  if (stack.beta) detail::map_from_json(*stack.beta, b);
}

inline void save_model(const ModelStack& stack, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << model_to_json(stack).dump(2) << '\n';
}

inline void load_model(ModelStack& stack, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  in >> j;
  model_from_json(stack, j);
}

}  // namespace sideinfo
