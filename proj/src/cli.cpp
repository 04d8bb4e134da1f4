#include <fingerfab/cli.hpp>

#include <atomic>
#include <charconv>
#include <csignal>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include <fingerfab/clock.hpp>
#include <fingerfab/gcode.hpp>
#include <fingerfab/print_protocol.hpp>
#include <fingerfab/slicer.hpp>
#include <fingerfab/stl.hpp>

namespace fingerfab::cli {

using nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::string& dest, const char* data, std::size_t size) {
  if (dest == "-") {
    std::cout.write(data, static_cast<std::streamsize>(size));
    std::cout.flush();
    return;
  }
  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + dest);
  out.write(data, static_cast<std::streamsize>(size));
  if (!out.flush()) throw std::runtime_error("short write to " + dest);
}

void write_text(const std::string& dest, const std::string& text) { write_bytes(dest, text.data(), text.size()); }

Vec3 parse_triple(const std::string& text, const char* flag) {
  Vec3 v;
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto end = i < 2 ? text.find(',', pos) : text.size();
    if (end == std::string::npos) throw UsageError(std::string(flag) + " expects three comma-separated numbers");
    const char* first = text.data() + pos;
    const char* last = text.data() + end;
    auto [ptr, ec] = std::from_chars(first, last, v[i]);
    if (ec != std::errc() || ptr != last) {
      throw UsageError(std::string(flag) + " expects three comma-separated numbers, got '" + text + "'");
    }
    pos = end + 1;
  }
  return v;
}

StlFormat parse_stl_format(const std::string& s) {
  if (s == "binary") return StlFormat::binary;
  if (s == "ascii") return StlFormat::ascii;
  throw UsageError("--format must be binary or ascii");
}

// Print services for the two configured printers. Printers without a
// base_url get an in-process mock server on the given clock.
struct PrinterFarm {
  std::vector<std::unique_ptr<MockPrinterServer>> servers;
  std::vector<std::unique_ptr<PrintClient>> clients;
};

ProductionSetup build_setup(const CliConfig& cfg, Clock& clock, PrinterFarm& farm, std::uint64_t seed) {
  if (cfg.printers.size() != 2) throw ConfigError("cell.printers: exactly two printers are required");
  if (cfg.designs.empty()) throw ConfigError("cell.designs: at least one design is required");
  std::string key = api_key_from_env(cfg);
  ProductionSetup setup;
  for (const auto& p : cfg.printers) {
    std::string url = p.base_url;
    if (url.empty()) {
      if (key.empty()) key = "in-process";
      farm.servers.push_back(std::make_unique<MockPrinterServer>(p.mock, clock, key));
      url = farm.servers.back()->base_url();
    } else if (key.empty()) {
      throw ConfigError(std::string("printer ") + p.id + " is remote; set " + kApiKeyEnv + " or cell.api_key");
    }
    farm.clients.push_back(std::make_unique<PrintClient>(PrinterEndpoint{url, key, p.poll_interval}, clock));
    setup.printers.push_back({p.id, p.actor, farm.clients.back().get(), p.poll_interval});
  }
  setup.magazines = cfg.magazines;
  setup.designs = load_designs(cfg);
  setup.assignment = cfg.assignment;
  setup.slice = cfg.slice;
  setup.safety = cfg.safety;
  setup.placement = PlacementBox(cfg.b_x, cfg.b_y);
  setup.robot_model = cfg.failure_model;
  setup.robot_model.rng_seed = seed;
  setup.print_retries = cfg.print_retries;
  setup.print_timeout = cfg.print_timeout;
  setup.work_dir = std::filesystem::temp_directory_path() / "fingerfab-work";
  return setup;
}

std::string design_for(const CliConfig& cfg, ObjectKind type) {
  for (const auto& [id, d] : cfg.designs) {
    if (d.object == object_name(type)) return id;
  }
  throw ConfigError(std::string("cell.designs: no design for finger type ") + object_name(type));
}

TaskCell task_cell_from(ProductionCell& cell) {
  TaskCell task;
  for (const auto& [id, m] : cell.magazines()) {
    if (m.kind == MagazineKind::qfe) task.qfe_magazines.push_back(m);
  }
  for (const auto& r : cell.records()) {
    if (r.status == FingerStatus::ready) {
      task.finger_types[r.id] = parse_object(cell.setup().designs.at(r.fingertip_design_id).object);
    }
  }
  return task;
}

// Stand-alone campaigns start from a QFE magazine stocked with `pairs`
// adjacent finger pairs per type.
TaskCell stocked_task_cell(const std::vector<ObjectKind>& types, int pairs) {
  TaskCell task;
  Magazine m;
  m.id = "qfe_stock";
  m.kind = MagazineKind::qfe;
  for (auto t : types) {
    for (int p = 1; p <= pairs; ++p) {
      for (const char* side : {"L", "R"}) {
        std::string id = std::string(object_name(t)) + "_" + std::to_string(p) + side;
        task.finger_types[id] = t;
        m.slots.emplace_back(std::move(id));
      }
    }
  }
  task.qfe_magazines.push_back(std::move(m));
  return task;
}

std::string render(const CampaignResult& result, ReportFormat format) {
  if (result.reports.empty()) throw ReportError("no trial reports to emit");
  return format == ReportFormat::csv ? render_csv(result.table) : render_json(result.reports, result.table);
}

CampaignOptions campaign_options(const CampaignConfig& c) {
  CampaignOptions o;
  o.fresh_pairs = c.fresh_pairs;
  o.parallel = c.parallel;
  o.offset_sign = c.offset_sign;
  return o;
}

ReportFormat format_for(const std::string& flag, const std::filesystem::path& out, ReportFormat fallback) {
  if (flag == "csv") return ReportFormat::csv;
  if (flag == "json") return ReportFormat::json;
  if (!flag.empty()) throw UsageError("--format must be csv or json");
  if (out.extension() == ".json") return ReportFormat::json;
  if (out.extension() == ".csv") return ReportFormat::csv;
  return fallback;
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

std::string records_to_json(const std::vector<FingerRecord>& records) {
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json arr = ordered_json::array();
  for (const auto& r : records) {
    ordered_json j;
    j["id"] = r.id;
    j["base_id"] = r.base_id;
    j["fingertip_design_id"] = r.fingertip_design_id;
    j["printer_id"] = r.printer_id;
    j["status"] = finger_status_name(r.status);
    j["failure"] = r.failure;
    j["qfe_magazine"] = r.qfe_magazine;
    j["qfe_slot"] = r.qfe_slot ? ordered_json(*r.qfe_slot) : ordered_json(nullptr);
    const auto& t = r.timestamps;
    j["timestamps"] = {{"base_picked", opt(t.base_picked)},
                       {"inserted_locked", opt(t.inserted_locked)},
                       {"print_started", opt(t.print_started)},
                       {"print_finished", opt(t.print_finished)},
                       {"stored_in_qfe", opt(t.stored_in_qfe)}};
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

RunAllOutput run_all(const CliConfig& cfg, std::uint64_t seed) {
  VirtualClock clock;
  PrinterFarm farm;
  ProductionCell cell(build_setup(cfg, clock, farm, seed), clock);
  const int pairs = cfg.campaign.fresh_pairs ? cfg.campaign.trials : 1;
  for (auto type : cfg.campaign.finger_types) {
    const auto design = design_for(cfg, type);
    for (int i = 0; i < pairs; ++i) cell.produce_finger_pair(design, design);
  }
  RunAllOutput out;
  out.events_jsonl = to_json_lines(cell.events());
  out.records_json = records_to_json(cell.records());
  auto task = task_cell_from(cell);
  const auto campaign = run_campaign(cfg.campaign.trials, cfg.campaign.finger_types, task, cfg.failure_model, seed,
                                     campaign_options(cfg.campaign));
  out.report = render(campaign, cfg.report.format);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Automated fabrication and evaluation of task-specific robot fingers"};
  app.name("fingerfab");
  app.require_subcommand(1);

  // transform-stl
  auto* transform = app.add_subcommand("transform-stl", "Orient a fingertip mesh and place it on the finger base");
  std::string t_in, t_out = "-", t_format = "binary", t_rot = "0,0,0";
  std::optional<double> t_bx;
  double t_by = 0.0;
  transform->add_option("input", t_in, "Input STL")->required()->check(CLI::ExistingFile);
  transform->add_option("--bx", t_bx, "Placement box width in x (mm); omitted means unbounded");
  transform->add_option("--by", t_by, "Placement box depth in y (mm)")->required();
  transform->add_option("--rot", t_rot, "Euler angles rx,ry,rz in degrees (applied x, then y, then z)");
  transform->add_option("--out", t_out, "Output STL, - for stdout")->required();
  transform->add_option("--format", t_format, "binary or ascii");

  // edit-gcode
  auto* edit = app.add_subcommand("edit-gcode", "Apply the homing/leveling safety edits to a gcode file");
  std::string e_in, e_out, e_report, e_config;
  edit->add_option("input", e_in, "Input gcode")->required()->check(CLI::ExistingFile);
  edit->add_option("--out", e_out, "Edited gcode, - for stdout")->required();
  edit->add_option("--report", e_report, "Write the edit report as JSON");
  edit->add_option("--config", e_config, "Cell config supplying safety rules and post-print commands")
      ->check(CLI::ExistingFile);

  // slice
  auto* slice = app.add_subcommand("slice", "Slice a placed mesh into gcode");
  std::string s_in, s_out, s_config, s_template;
  bool s_stub = false;
  slice->add_option("input", s_in, "Input STL")->required()->check(CLI::ExistingFile);
  slice->add_option("--out", s_out, "Output gcode (default: input with .gcode extension)");
  slice->add_option("--config", s_config, "Cell config supplying slice settings")->check(CLI::ExistingFile);
  slice->add_option("--command", s_template, "External slicer command template");
  slice->add_flag("--stub", s_stub, "Use the built-in deterministic stub slicer");

  // serve-mock-printer
  auto* serve = app.add_subcommand("serve-mock-printer", "Run a simulated printer speaking the print-server API");
  int v_port = 5000;
  std::string v_config, v_printer, v_host = "127.0.0.1";
  serve->add_option("--port", v_port, "TCP port (0 picks a free one)");
  serve->add_option("--host", v_host, "Bind address");
  serve->add_option("--config", v_config, "Cell config supplying the mock printer settings")->check(CLI::ExistingFile);
  serve->add_option("--printer", v_printer, "Printer id in the config (default: first)");

  // produce
  auto* produce = app.add_subcommand("produce", "Produce one finger pair");
  std::string p_a, p_b, p_config, p_events, p_records;
  bool p_real = false;
  std::optional<std::uint64_t> p_seed;
  produce->add_option("--design-a", p_a, "Fingertip design for the first finger")->required();
  produce->add_option("--design-b", p_b, "Fingertip design for the second finger")->required();
  produce->add_option("--config", p_config, "Cell config")->required()->check(CLI::ExistingFile);
  produce->add_option("--seed", p_seed, "Robot failure-model seed (default: config)");
  produce->add_option("--events", p_events, "Event log (JSON lines), - for stdout");
  produce->add_option("--records", p_records, "Finger records (JSON), - for stdout");
  produce->add_flag("--real-clock", p_real, "Run on wall-clock time instead of the virtual clock");

  // simulate-campaign
  auto* sim = app.add_subcommand("simulate-campaign", "Run the task-experiment campaign");
  std::optional<int> c_trials;
  std::string c_config, c_out, c_format;
  std::uint64_t c_seed = 0;
  bool c_fresh = false, c_parallel = false;
  sim->add_option("--trials", c_trials, "Trials per finger type (default: config)");
  sim->add_option("--config", c_config, "Cell config")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", c_seed, "Campaign seed");
  sim->add_option("--out", c_out, "Report file, - for stdout")->required();
  sim->add_option("--format", c_format, "csv or json (default: from --out extension)");
  sim->add_flag("--fresh-pairs", c_fresh, "Use a fresh finger pair per trial");
  sim->add_flag("--parallel", c_parallel, "One simulated robot per finger type");

  // run-all
  auto* all = app.add_subcommand("run-all", "Produce one pair per finger type, then run the campaign on them");
  std::string r_config, r_out_dir = ".";
  std::uint64_t r_seed = 0;
  all->add_option("--config", r_config, "Cell config")->required()->check(CLI::ExistingFile);
  all->add_option("--seed", r_seed, "Seed for production and campaign");
  all->add_option("--out-dir", r_out_dir, "Directory for the event log, records and report");

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  try {
    if (transform->parsed()) {
      const Vec3 rot = parse_triple(t_rot, "--rot");
      const auto format = parse_stl_format(t_format);
      const PlacementBox box(t_bx.value_or(std::numeric_limits<double>::infinity()), t_by);
      const auto mesh = read_stl_file(t_in);
      const auto placed = place_on_base(rotate_mesh(mesh, Rotation::from_euler_xyz_deg(rot.x(), rot.y(), rot.z())), box);
      const auto bytes = write_stl(placed, format);
      write_bytes(t_out, reinterpret_cast<const char*>(bytes.data()), bytes.size());
      const auto bb = bounding_box(placed);
      std::cerr << "placed " << placed.triangles.size() << " facets; bbox x [" << bb.min.x() << ", " << bb.max.x()
                << "] y [" << bb.min.y() << ", " << bb.max.y() << "] z [" << bb.min.z() << ", " << bb.max.z()
                << "]\n";
    } else if (edit->parsed()) {
      SafetyRules rules;
      std::vector<std::string> post;
      if (!e_config.empty()) {
        const auto cfg = load_config(e_config);
        rules = cfg.safety;
        post = cfg.slice.post_print_commands;
      }
      auto result = apply_safety_edits(parse_gcode(read_text(e_in)), rules);
      if (!post.empty()) result.document = append_post_print(result.document, post, &result.report);
      write_text(e_out, result.document.serialize());
      const ordered_json report = {{"homing_lines_modified", result.report.homing_lines_modified},
                                   {"leveling_lines_removed", result.report.leveling_lines_removed},
                                   {"post_print_lines_appended", result.report.post_print_lines_appended}};
      if (!e_report.empty()) write_text(e_report, report.dump(2) + "\n");
      std::cerr << report.dump() << "\n";
    } else if (slice->parsed()) {
      SliceConfig sc = s_config.empty() ? SliceConfig{} : load_config(s_config).slice;
      if (!s_template.empty()) {
        sc.command_template = split_template(s_template);
        sc.mode = SlicerMode::external;
      }
      if (s_stub) sc.mode = SlicerMode::stub;
      const auto result = run_slicer(sc, s_in, s_out);
      if (!result.log.empty()) std::cerr << result.log << (result.log.back() == '\n' ? "" : "\n");
      std::cerr << "wrote " << result.gcode_path.string() << "\n";
    } else if (serve->parsed()) {
      CliConfig cfg = v_config.empty() ? CliConfig{} : load_config(v_config);
      MockPrinterConfig mock;
      if (!cfg.printers.empty()) {
        const PrinterConfig* chosen = &cfg.printers.front();
        if (!v_printer.empty()) {
          chosen = nullptr;
          for (const auto& p : cfg.printers) {
            if (p.id == v_printer) chosen = &p;
          }
          if (!chosen) throw ConfigError("cell.printers: no printer " + v_printer);
        }
        mock = chosen->mock;
      } else if (!v_printer.empty()) {
        throw ConfigError("cell.printers: no printer " + v_printer);
      }
      const std::string key = api_key_from_env(cfg);
      if (key.empty()) throw ConfigError(std::string("set ") + kApiKeyEnv + " (or cell.api_key) to the API key");
      SteadyClock clock;
      MockPrinterServer server(mock, clock, key, v_port, v_host);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "mock printer listening on " << server.base_url() << "\n";
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
    } else if (produce->parsed()) {
      const auto cfg = load_config(p_config);
      const std::uint64_t seed = p_seed.value_or(cfg.failure_model.rng_seed);
      VirtualClock vclock;
      SteadyClock sclock;
      Clock& clock = p_real ? static_cast<Clock&>(sclock) : vclock;
      PrinterFarm farm;
      ProductionCell cell(build_setup(cfg, clock, farm, seed), clock);
      const auto pair = cell.produce_finger_pair(p_a, p_b);
      write_text(p_events.empty() ? cfg.report.events.string() : p_events, to_json_lines(cell.events()));
      write_text(p_records.empty() ? cfg.report.records.string() : p_records, records_to_json(cell.records()));
      for (const auto* r : {&pair.first, &pair.second}) {
        std::cerr << r->id << " " << finger_status_name(r->status) << (r->failure.empty() ? "" : ": ") << r->failure
                  << "\n";
      }
      const auto verdict = replay_log(cell.events());
      if (!verdict.ok) throw ProductionError("event log failed replay: " + verdict.violation);
      if (pair.first.status != FingerStatus::ready || pair.second.status != FingerStatus::ready) return kExitDomain;
    } else if (sim->parsed()) {
      auto cfg = load_config(c_config);
      if (c_trials) cfg.campaign.trials = *c_trials;
      if (c_fresh) cfg.campaign.fresh_pairs = true;
      if (c_parallel) cfg.campaign.parallel = true;
      if (cfg.campaign.trials < 1) throw UsageError("--trials must be >= 1");
      const auto format = format_for(c_format, c_out, cfg.report.format);
      auto task = stocked_task_cell(cfg.campaign.finger_types, cfg.campaign.fresh_pairs ? cfg.campaign.trials : 1);
      const auto result = run_campaign(cfg.campaign.trials, cfg.campaign.finger_types, task, cfg.failure_model,
                                       c_seed, campaign_options(cfg.campaign));
      write_text(c_out, render(result, format));
      std::cerr << result.experiment_count() << " experiments in " << result.reports.size() << " trials\n";
    } else if (all->parsed()) {
      const auto cfg = load_config(r_config);
      const auto out = run_all(cfg, r_seed);
      const std::filesystem::path dir = r_out_dir;
      std::filesystem::create_directories(dir);
      write_text((dir / cfg.report.events.filename()).string(), out.events_jsonl);
      write_text((dir / cfg.report.records.filename()).string(), out.records_json);
      write_text((dir / cfg.report.campaign.filename()).string(), out.report);
      std::cerr << "wrote " << (dir / cfg.report.events.filename()).string() << ", "
                << (dir / cfg.report.records.filename()).string() << ", "
                << (dir / cfg.report.campaign.filename()).string() << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (auto& a : storage) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data());
}

}  // namespace fingerfab::cli
