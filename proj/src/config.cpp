// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/config.hpp"

#include <charconv>

#include "ressel/error.hpp"
#include "ressel/simulated_vlm.hpp"

namespace ressel {

using nlohmann::json;

Mode Mode::parse(std::string_view text) {
  Mode m;
  if (text == "continuous") {
    m.kind = Kind::kContinuous;
  } else if (text == "discrete") {
    m.kind = Kind::kDiscrete;
  } else if (text == "passthrough") {
    m.kind = Kind::kPassthrough;
  } else if (text.starts_with("fixed:")) {
    m.kind = Kind::kFixed;
    const auto digits = text.substr(6);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), m.fixed_resolution);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || m.fixed_resolution <= 0)
      throw InvalidArgument("fixed mode needs a positive resolution, got '" + std::string(text) + "'");
  } else {
    throw InvalidArgument("unknown mode '" + std::string(text) +
                          "' (expected continuous|discrete|passthrough|fixed:<r>)");
  }
  return m;
}

std::string Mode::to_string() const {
  switch (kind) {
    case Kind::kContinuous: return "continuous";
    case Kind::kDiscrete: return "discrete";
    case Kind::kPassthrough: return "passthrough";
    case Kind::kFixed: return "fixed:" + std::to_string(fixed_resolution);
  }
  return "continuous";
}

std::vector<int> AppConfig::supported_sizes() const {
  if (!profile.supported_sizes.empty()) return profile.supported_sizes;
  const auto s = menu.supported_sizes();
  return {s.begin(), s.end()};
}

namespace {

// Runs `fn`, prefixing any validation failure with the JSON path.
template <typename Fn>
auto at_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.starts_with(path) ? msg : path + ": " + msg);
  } catch (const ValidationError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

AppConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  AppConfig cfg;
  cfg.raw = j;
  if (j.contains("menu")) cfg.menu = at_path("menu", [&] { return menu_from_json(j["menu"]); });
  if (j.contains("labeling")) {
    at_path("labeling", [&] {
      const auto& l = j["labeling"];
      cfg.labeling.tau = l.value("tau", cfg.labeling.tau);
      cfg.labeling.delta = l.value("delta", cfg.labeling.delta);
      cfg.labeling.early_exit = l.value("early_exit", cfg.labeling.early_exit);
      cfg.labeling.validate();
    });
  }
  if (j.contains("image")) {
    at_path("image", [&] {
      const auto& im = j["image"];
      cfg.image.filter = imageops::parse_filter(im.value("filter", std::string("bicubic")));
      cfg.image.jpeg_quality = im.value("jpeg_quality", 90);
      if (cfg.image.jpeg_quality < 1 || cfg.image.jpeg_quality > 100)
        throw ConfigError("image.jpeg_quality: must be in [1, 100]");
    });
  }
  if (j.contains("vlm")) {
    cfg.vlm = at_path("vlm", [&] {
      const auto& v = j["vlm"];
      VlmSettings s;
      const auto kind = v.value("kind", std::string("http"));
      if (kind == "simulated") {
        s.kind = VlmSettings::Kind::kSimulated;
        s.simulated_spec = resolve(base_dir, v.at("spec").get<std::string>());
      } else if (kind == "http") {
        s.kind = VlmSettings::Kind::kHttp;
        s.endpoint = vlm::endpoint_from_json(v);
      } else {
        throw ConfigError("vlm.kind: expected http|simulated, got '" + kind + "'");
      }
      return s;
    });
  }
  if (j.contains("profile")) {
    cfg.profile = at_path("profile", [&] {
      const auto& p = j["profile"];
      if (p.is_string()) {
        const auto name = p.get<std::string>();
        const auto names = cost::builtin_profile_names();
        if (std::find(names.begin(), names.end(), name) != names.end()) return cost::builtin_profile(name);
        return cost::resolve_profile(resolve(base_dir, name).string());
      }
      return cost::profile_from_json(p);
    });
  }
  if (j.contains("features"))
    cfg.features = at_path("features", [&] { return features::endpoint_from_json(j["features"]); });
  if (j.contains("gateway")) {
    at_path("gateway", [&] {
      const auto& g = j["gateway"];
      auto& gw = cfg.gateway;
      const auto listen = g.value("listen", std::string("127.0.0.1:8080"));
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw ConfigError("gateway.listen: expected host:port");
      gw.host = listen.substr(0, colon);
      gw.port = at_path("gateway.listen", [&] { return std::stoi(listen.substr(colon + 1)); });
      if (gw.port < 0 || gw.port > 65535) throw ConfigError("gateway.listen: port out of range");
      if (g.contains("head")) gw.head_path = resolve(base_dir, g["head"].get<std::string>());
      gw.mode = at_path("gateway.mode", [&] { return Mode::parse(g.value("mode", std::string("continuous"))); });
      gw.concurrency = g.value("concurrency", std::size_t{16});
      if (gw.concurrency == 0) throw ConfigError("gateway.concurrency: must be >= 1");
      const auto fallback = g.value("fallback", std::string("degrade"));
      if (fallback == "degrade") gw.fallback = Fallback::kDegrade;
      else if (fallback == "fail") gw.fallback = Fallback::kFail;
      else throw ConfigError("gateway.fallback: expected degrade|fail");
      gw.probe_interval_s = g.value("probe_interval_s", 5.0);
      if (gw.probe_interval_s <= 0) throw ConfigError("gateway.probe_interval_s: must be > 0");
    });
  }
  const auto supported = cfg.supported_sizes();
  if (supported.back() < cfg.menu.back())
    throw ConfigError("profile.supported_sizes: must contain a value >= the largest menu entry");
  if (cfg.gateway.mode.kind == Mode::Kind::kFixed &&
      std::find(supported.begin(), supported.end(), cfg.gateway.mode.fixed_resolution) == supported.end())
    throw ConfigError("gateway.mode: fixed resolution must be one of the supported sizes");
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(imageops::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j, path.parent_path());
}

std::unique_ptr<vlm::VlmClient> make_vlm_client(const VlmSettings& settings) {
  if (settings.kind == VlmSettings::Kind::kSimulated)
    return std::make_unique<vlm::SimulatedVlm>(vlm::SimulatedVlmSpec::load(settings.simulated_spec));
  return std::make_unique<vlm::HttpVlmClient>(settings.endpoint);
}

}  // namespace ressel
