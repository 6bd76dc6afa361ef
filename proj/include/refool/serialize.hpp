#pragma once

// JSON forms of kernels and parameter ranges shared by plans, reports and
// configs.

#include "json.hpp"

#include "refool/core.hpp"
#include "refool/reflect.hpp"

namespace refool {

inline nlohmann::json kernel_to_json(const ReflectionKernel& k) {
  return std::visit(
      [](const auto& kk) -> nlohmann::json {
        using K = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<K, FocalKernel>) {
          return {{"type", "focal"}, {"alpha", kk.alpha}};
        } else if constexpr (std::is_same_v<K, DefocusKernel>) {
          return {{"type", "defocus"}, {"sigma", kk.sigma}, {"alpha", kk.alpha}, {"radius", kk.radius()}};
        } else {
          return {{"type", "ghost"},
                  {"alpha", kk.alpha},
                  {"delta", kk.delta},
                  {"direction", to_string(kk.direction)},
                  {"attenuation", kk.attenuation}};
        }
      },
      k);
}

inline ReflectionKernel kernel_from_json(const nlohmann::json& j) {
  try {
    const KernelType t = parse_kernel_type(j.at("type").get<std::string>());
    ReflectionKernel k;
    switch (t) {
      case KernelType::focal: k = FocalKernel{j.at("alpha").get<double>()}; break;
      case KernelType::defocus: k = DefocusKernel{j.at("sigma").get<double>(), j.at("alpha").get<double>()}; break;
      case KernelType::ghost:
        k = GhostKernel{j.at("alpha").get<double>(), j.at("delta").get<int>(),
                        parse_ghost_direction(j.value("direction", std::string("horizontal"))),
                        j.value("attenuation", 0.6)};
        break;
    }
    validate_kernel(k);
    return k;
  } catch (const nlohmann::json::exception& ex) {
    fail_usage(std::string("malformed kernel spec: ") + ex.what());
  }
}

inline nlohmann::json ranges_to_json(const KernelParamRanges& r) {
  return {{"focal_alpha", {r.focal_alpha.lo, r.focal_alpha.hi}},
          {"defocus_sigma", {r.defocus_sigma.lo, r.defocus_sigma.hi}},
          {"ghost_alpha", {r.ghost_alpha.lo, r.ghost_alpha.hi}},
          {"ghost_delta", {r.ghost_delta.lo, r.ghost_delta.hi}},
          {"ghost_attenuation", r.ghost_attenuation}};
}

}  // namespace refool
