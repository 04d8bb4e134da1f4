#include <fingerfab/config.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include <fingerfab/stl.hpp>

namespace fingerfab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError((path.empty() ? std::string("<root>") : path) + ": " + what);
}

const char* type_of(const json& j) { return j.type_name(); }

// Object view that remembers which keys were read; finish() rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, std::string("expected an object, got ") + type_of(j_));
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) fail(at(key), "required key missing");
    return *v;
  }

  double number(const std::string& key, double def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number()) fail(at(key), std::string("expected a number, got ") + type_of(*v));
    return v->get<double>();
  }

  int integer(const std::string& key, int def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(at(key), std::string("expected an integer, got ") + type_of(*v));
    return v->get<int>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(at(key), std::string("expected a boolean, got ") + type_of(*v));
    return v->get<bool>();
  }

  std::string string(const std::string& key, std::string def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_string()) fail(at(key), std::string("expected a string, got ") + type_of(*v));
    return v->get<std::string>();
  }

  std::optional<Section> section(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    return Section(*v, at(key));
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
    v[i] = j[i].get<double>();
  }
  return v;
}

std::vector<std::string> string_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) fail(path + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

template <typename Fn>
auto wrap(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

MockPrinterConfig parse_mock(Section s) {
  MockPrinterConfig m;
  if (auto d = s.section("durations_s")) {
    m.durations.clear();
    for (auto it = d->raw().begin(); it != d->raw().end(); ++it) {
      m.durations[it.key()] = d->number(it.key(), 0.0);
    }
    d->finish();
  }
  m.default_duration = s.number("default_duration_s", m.default_duration);
  if (const json* f = s.get("faults")) {
    if (!f->is_array()) fail(s.at("faults"), "expected an array");
    for (std::size_t i = 0; i < f->size(); ++i) {
      Section fs((*f)[i], s.at("faults") + "[" + std::to_string(i) + "]");
      FaultSpec spec;
      spec.file = fs.string("file", "");
      if (spec.file.empty()) fail(fs.at("file"), "required non-empty string");
      spec.at_progress = fs.number("at_progress", spec.at_progress);
      if (!(spec.at_progress > 0.0 && spec.at_progress < 1.0)) fail(fs.at("at_progress"), "must lie in (0, 1)");
      fs.finish();
      m.faults.push_back(spec);
    }
  }
  s.finish();
  return m;
}

Magazine parse_magazine(Section s) {
  Magazine m;
  m.id = s.string("id", "");
  if (m.id.empty()) fail(s.at("id"), "required non-empty string");
  m.kind = wrap(s.at("kind"), [&] { return parse_magazine_kind(s.string("kind", "finger_base")); });
  if (const json* slots = s.get("slots")) {
    if (!slots->is_array()) fail(s.at("slots"), "expected an array of strings or nulls");
    for (std::size_t i = 0; i < slots->size(); ++i) {
      const auto& v = (*slots)[i];
      if (v.is_null()) {
        m.slots.emplace_back();
      } else if (v.is_string()) {
        m.slots.emplace_back(v.get<std::string>());
      } else {
        fail(s.at("slots") + "[" + std::to_string(i) + "]", "expected a string or null");
      }
    }
  }
  const int capacity = s.integer("capacity", static_cast<int>(m.slots.size()));
  if (capacity < static_cast<int>(m.slots.size())) fail(s.at("capacity"), "smaller than the listed slots");
  m.slots.resize(static_cast<std::size_t>(capacity));
  s.finish();
  wrap(s.path(), [&] {
    m.validate();
    return 0;
  });
  return m;
}

void parse_cell(Section s, CliConfig& cfg) {
  if (const json* printers = s.get("printers")) {
    if (!printers->is_array()) fail(s.at("printers"), "expected an array");
    for (std::size_t i = 0; i < printers->size(); ++i) {
      Section ps((*printers)[i], s.at("printers") + "[" + std::to_string(i) + "]");
      PrinterConfig p;
      p.id = ps.string("id", "");
      if (p.id.empty()) fail(ps.at("id"), "required non-empty string");
      p.actor = wrap(ps.at("actor"), [&] { return parse_actor(ps.string("actor", p.id)); });
      if (p.actor != Actor::printer_A && p.actor != Actor::printer_B) fail(ps.at("actor"), "must be printer_A or printer_B");
      p.base_url = ps.string("base_url", "");
      if (auto m = ps.section("mock")) p.mock = parse_mock(std::move(*m));
      p.poll_interval = ps.number("poll_interval_s", p.poll_interval);
      if (!(p.poll_interval > 0.0)) fail(ps.at("poll_interval_s"), "must be > 0");
      ps.finish();
      cfg.printers.push_back(std::move(p));
    }
  }
  cfg.api_key = s.string("api_key", "");
  if (const json* mags = s.get("magazines")) {
    if (!mags->is_array()) fail(s.at("magazines"), "expected an array");
    for (std::size_t i = 0; i < mags->size(); ++i) {
      cfg.magazines.push_back(parse_magazine(Section((*mags)[i], s.at("magazines") + "[" + std::to_string(i) + "]")));
    }
  }
  if (auto a = s.section("assignment")) {
    auto& as = cfg.assignment;
    as.printer_a = a->string("printer_a", as.printer_a);
    as.printer_b = a->string("printer_b", as.printer_b);
    as.base_magazine_a = a->string("base_magazine_a", as.base_magazine_a);
    as.base_magazine_b = a->string("base_magazine_b", as.base_magazine_b);
    as.qfe_magazine = a->string("qfe_magazine", as.qfe_magazine);
    a->finish();
  }
  if (auto d = s.section("designs")) {
    for (auto it = d->raw().begin(); it != d->raw().end(); ++it) {
      auto ds = *d->section(it.key());
      DesignConfig design;
      const std::string stl = ds.string("stl", "");
      if (stl.empty()) fail(ds.at("stl"), "required non-empty string");
      design.stl = std::filesystem::path(stl).is_absolute() ? std::filesystem::path(stl) : cfg.base_dir / stl;
      design.object = ds.string("object", it.key());
      wrap(ds.at("object"), [&] { return parse_object(design.object); });
      ds.finish();
      cfg.designs[it.key()] = std::move(design);
    }
    d->finish();
  }
  cfg.print_retries = s.integer("print_retries", cfg.print_retries);
  if (cfg.print_retries < 0) fail(s.at("print_retries"), "must be >= 0");
  cfg.print_timeout = s.number("print_timeout_s", cfg.print_timeout);
  s.finish();
}

void parse_slice(Section s, CliConfig& cfg) {
  auto& sc = cfg.slice;
  sc.layer_height = s.number("layer_height", sc.layer_height);
  sc.infill_density = s.number("infill_density", sc.infill_density);
  sc.adhesion = wrap(s.at("adhesion"), [&] { return parse_adhesion(s.string("adhesion", adhesion_name(sc.adhesion))); });
  sc.z_offset = s.number("z_offset", sc.z_offset);
  if (const json* pp = s.get("post_print_commands")) sc.post_print_commands = string_list(*pp, s.at("post_print_commands"));
  if (const json* t = s.get("command_template")) {
    sc.command_template = t->is_string() ? split_template(t->get<std::string>()) : string_list(*t, s.at("command_template"));
  }
  const std::string mode = s.string("mode", "stub");
  if (mode == "stub") {
    sc.mode = SlicerMode::stub;
  } else if (mode == "external") {
    sc.mode = SlicerMode::external;
  } else {
    fail(s.at("mode"), "expected \"stub\" or \"external\"");
  }
  s.finish();
  wrap(s.path(), [&] {
    sc.validate();
    return 0;
  });
}

void parse_safety(Section s, CliConfig& cfg) {
  if (const json* r = s.get("homing_replacement")) cfg.safety.homing_replacement = string_list(*r, s.at("homing_replacement"));
  cfg.safety.remove_g29 = s.boolean("remove_g29", cfg.safety.remove_g29);
  cfg.safety.remove_m420_enable = s.boolean("remove_m420_enable", cfg.safety.remove_m420_enable);
  s.finish();
}

void parse_placement(Section s, CliConfig& cfg) {
  cfg.b_x = s.number("b_x", cfg.b_x);
  cfg.b_y = s.number("b_y", cfg.b_y);
  wrap(s.path(), [&] { return PlacementBox(cfg.b_x, cfg.b_y); });
  if (auto r = s.section("rotations_deg")) {
    for (auto it = r->raw().begin(); it != r->raw().end(); ++it) {
      r->get(it.key());
      cfg.rotations_deg[it.key()] = vec3(it.value(), r->at(it.key()));
    }
  }
  s.finish();
}

std::map<SkillKind, double> skill_map(Section s) {
  std::map<SkillKind, double> out;
  for (auto it = s.raw().begin(); it != s.raw().end(); ++it) {
    const auto kind = wrap(s.at(it.key()), [&] { return parse_skill_kind(it.key()); });
    out[kind] = s.number(it.key(), 0.0);
  }
  s.finish();
  return out;
}

void parse_failure_model(Section s, CliConfig& cfg) {
  auto& m = cfg.failure_model;
  if (auto ss = s.section("skill_success")) m.skill_success = skill_map(std::move(*ss));
  m.default_success = s.number("default_success", m.default_success);
  m.position_noise_mm = s.number("position_noise_mm", m.position_noise_mm);
  m.rotation_noise_deg = s.number("rotation_noise_deg", m.rotation_noise_deg);
  m.noise_clip_sigma = s.number("noise_clip_sigma", m.noise_clip_sigma);
  if (auto envs = s.section("envelopes")) {
    for (auto it = envs->raw().begin(); it != envs->raw().end(); ++it) {
      wrap(envs->at(it.key()), [&] { return parse_object(it.key()); });
      auto es = *envs->section(it.key());
      ToleranceEnvelope env;
      if (const json* p = es.get("position_mm")) env.position_mm = vec3(*p, es.at("position_mm"));
      if (const json* r = es.get("rotation_deg")) env.rotation_deg = vec3(*r, es.at("rotation_deg"));
      es.finish();
      m.envelopes[it.key()] = env;
    }
    envs->finish();
  }
  m.out_of_envelope_success = s.number("out_of_envelope_success", m.out_of_envelope_success);
  m.failure_slip_mm = s.number("failure_slip_mm", m.failure_slip_mm);
  if (auto d = s.section("skill_duration_s")) m.skill_duration = skill_map(std::move(*d));
  m.default_skill_duration = s.number("default_skill_duration_s", m.default_skill_duration);
  if (const json* seed = s.get("rng_seed")) {
    if (!seed->is_number_unsigned() && !seed->is_number_integer()) fail(s.at("rng_seed"), "expected an integer");
    m.rng_seed = seed->get<std::uint64_t>();
  }
  s.finish();
  wrap(s.path(), [&] {
    m.validate();
    return 0;
  });
}

void parse_campaign(Section s, CliConfig& cfg) {
  auto& c = cfg.campaign;
  c.trials = s.integer("trials", c.trials);
  if (c.trials < 1) fail(s.at("trials"), "must be >= 1");
  if (const json* t = s.get("finger_types")) {
    c.finger_types.clear();
    const auto names = string_list(*t, s.at("finger_types"));
    for (std::size_t i = 0; i < names.size(); ++i) {
      c.finger_types.push_back(
          wrap(s.at("finger_types") + "[" + std::to_string(i) + "]", [&] { return parse_object(names[i]); }));
    }
    if (c.finger_types.empty()) fail(s.at("finger_types"), "must not be empty");
  }
  c.fresh_pairs = s.boolean("fresh_pairs", c.fresh_pairs);
  c.parallel = s.boolean("parallel", c.parallel);
  if (const json* sign = s.get("offset_sign")) {
    c.offset_sign = vec3(*sign, s.at("offset_sign"));
    for (int i = 0; i < 3; ++i) {
      if (c.offset_sign[i] != 1.0 && c.offset_sign[i] != -1.0) fail(s.at("offset_sign"), "entries must be 1 or -1");
    }
  }
  s.finish();
}

void parse_report(Section s, CliConfig& cfg) {
  auto& r = cfg.report;
  r.events = s.string("events", r.events.string());
  r.records = s.string("records", r.records.string());
  r.campaign = s.string("campaign", r.campaign.string());
  const std::string format = s.string("format", "csv");
  if (format == "csv") {
    r.format = ReportFormat::csv;
  } else if (format == "json") {
    r.format = ReportFormat::json;
  } else {
    fail(s.at("format"), "expected \"csv\" or \"json\"");
  }
  s.finish();
}

}  // namespace

CliConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  CliConfig cfg;
  cfg.base_dir = base_dir;
  Section s(root, "");
  if (auto c = s.section("cell")) parse_cell(std::move(*c), cfg);
  if (auto c = s.section("slice")) parse_slice(std::move(*c), cfg);
  if (auto c = s.section("safety")) parse_safety(std::move(*c), cfg);
  if (auto c = s.section("placement")) parse_placement(std::move(*c), cfg);
  if (auto c = s.section("failure_model")) parse_failure_model(std::move(*c), cfg);
  if (auto c = s.section("campaign")) parse_campaign(std::move(*c), cfg);
  if (auto c = s.section("report")) parse_report(std::move(*c), cfg);
  s.finish();
  for (const auto& [id, rot] : cfg.rotations_deg) {
    if (!cfg.designs.count(id)) fail("placement.rotations_deg." + id, "no such design");
  }
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::map<std::string, DesignSpec> load_designs(const CliConfig& cfg) {
  std::map<std::string, DesignSpec> out;
  for (const auto& [id, d] : cfg.designs) {
    DesignSpec spec;
    spec.source = d.stl.string();
    spec.mesh = read_stl_file(d.stl);
    spec.object = d.object;
    if (auto it = cfg.rotations_deg.find(id); it != cfg.rotations_deg.end()) {
      spec.rotation = Rotation::from_euler_xyz_deg(it->second.x(), it->second.y(), it->second.z());
    }
    out.emplace(id, std::move(spec));
  }
  return out;
}

std::string api_key_from_env(const CliConfig& cfg) {
  if (const char* env = std::getenv(kApiKeyEnv); env && *env) return env;
  return cfg.api_key;
}

}  // namespace fingerfab
