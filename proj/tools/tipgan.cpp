// tipgan: calibration, datasets, atlas, training, evaluation and plot data.
//
// Every subcommand reads its options from the [subcommand] section of the
// --config file; command-line flags win. Outputs land in --run-dir together
// with manifest.json.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tipgan/calibration.hpp"
#include "tipgan/explorer.hpp"
#include "tipgan/hash.hpp"
#include "tipgan/hysteresis.hpp"
#include "tipgan/manifest.hpp"
#include "tipgan/metrics.hpp"
#include "tipgan/oracle.hpp"
#include "tipgan/param_file.hpp"
#include "tipgan/tipgan.hpp"

namespace fs = std::filesystem;
using namespace tipgan;

namespace {

struct Globals {
  std::string config;
  std::string run_dir = "run";
  std::string params;
  int jobs = 1;
  double dt_years = 0.25;
  double horizon_years = 4000.0;

  fs::path run() const { return fs::path(run_dir); }
  fs::path params_path() const { return params.empty() ? run() / "calibrated_params.txt" : fs::path(params); }
  IntegratorOptions integrator() const {
    IntegratorOptions o;
    o.dt_years = dt_years;
    o.horizon_years = horizon_years;
    return o;
  }
};

fs::path or_default(const std::string& s, const fs::path& fallback) { return s.empty() ? fallback : fs::path(s); }

RunManifest start_manifest(const Globals& g, std::string name) {
  RunManifest m;
  m.subcommand = std::move(name);
  m.config_file = g.config;
  m.versions = {{"param_file", kParamFileVersion}, {"checkpoint", kCheckpointVersion}, {"manifest", kManifestVersion}};
  return m;
}

ParamSet load_params(const Globals& g, ManifestFile& mf, RunManifest& m) {
  const fs::path p = g.params_path();
  mf.verify_input(p);
  m.add_input(p);
  m.versions["calibration_sha256"] = sha256_file(p);
  return load_param_set(p);
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  auto out = io::open_out(p);
  out << j.dump(2) << "\n";
}

Dataset load_checked_dataset(const fs::path& p, ManifestFile& mf, RunManifest& m, const std::string& calibration) {
  mf.verify_input(p);
  m.add_input(p);
  fs::path side = p;
  side.replace_extension(".json");
  if (fs::exists(side)) {
    const auto j = nlohmann::json::parse(io::read_file(side));
    if (!calibration.empty() && j.value("calibration_sha256", calibration) != calibration)
      fail(ErrorKind::HashMismatch, p.string() + " was labeled with a different parameter file");
  }
  return load_dataset(p);
}

Atlas load_checked_atlas(const fs::path& p, ManifestFile& mf, RunManifest& m) {
  mf.verify_input(p);
  m.add_input(p);
  return load_atlas(p);
}

// ---- calibrate --------------------------------------------------------------------

struct CalibrateArgs {
  std::string start, out, report;
  int iterations = 0;
  int bisections = 10;
  std::uint64_t seed = 1;
};

void cmd_calibrate(const Globals& g, const CalibrateArgs& a) {
  ManifestFile mf(g.run() / "manifest.json");
  RunManifest m = start_manifest(g, "calibrate");
  m.seeds = {a.seed};
  ParamSet ps;
  if (!a.start.empty()) {
    mf.verify_input(a.start);
    m.add_input(a.start);
    ps = load_param_set(a.start);
  }
  const IntegratorOptions opt = g.integrator();
  CalibrationReport rep = evaluate_calibration(ps, {}, opt, a.bisections, g.jobs);
  nlohmann::json search = nullptr;
  if (!rep.passed() && a.iterations > 0) {
    SearchOptions so;
    so.seed = a.seed;
    so.iterations = a.iterations;
    const SearchResult r = calibration_search(ps, {}, so, opt);
    ps = r.best;
    search = {{"iterations", a.iterations}, {"accepted", r.accepted}, {"misfit", r.misfit}};
    rep = evaluate_calibration(ps, {}, opt, a.bisections, g.jobs);
  }
  const fs::path out = or_default(a.out, g.run() / "calibrated_params.txt");
  const fs::path report = or_default(a.report, g.run() / "calibration_report.json");
  nlohmann::json j = rep.to_json();
  j["search"] = search;
  write_json(report, j);
  m.add_output(report);
  if (!rep.passed()) {
    mf.record(m);
    mf.save();
    fail(ErrorKind::CalibrationFailed, rep.violated());
  }
  save_param_set(out, ps);
  m.add_output(out);
  mf.record(m);
  mf.save();
  std::cout << "equilibrium m_n " << rep.equilibrium_m_n << " Sv, after step " << rep.step_m_n
            << " Sv, band share " << rep.band_share << "\n";
}

// ---- dataset ----------------------------------------------------------------------

struct DatasetArgs {
  std::size_t count = 10774;
  std::uint64_t seed = 7;
  std::string split = "train";
  std::string out;
};

void cmd_dataset(const Globals& g, const DatasetArgs& a) {
  ManifestFile mf(g.run() / "manifest.json");
  RunManifest m = start_manifest(g, "dataset/" + a.split);
  m.seeds = {a.seed};
  const ParamSet ps = load_params(g, mf, m);
  const Split split = parse_split(a.split);
  const BoxModelOracle oracle(ps, g.integrator());
  const Dataset ds = label_dataset(sample_uniform(Bounds::experiment(), a.count, a.seed), oracle, split, a.seed,
                                   Bounds::experiment(), g.jobs);
  const fs::path out = or_default(a.out, g.run() / (a.split + ".csv"));
  {
    auto f = io::open_out(out);
    write_dataset_csv(f, ds);
  }
  fs::path side = out;
  side.replace_extension(".json");
  write_json(side, dataset_sidecar(ds, m.versions["calibration_sha256"].get<std::string>()));
  m.add_output(out);
  m.add_output(side);
  mf.record(m);
  mf.save();
  std::cout << "wrote " << ds.samples.size() << " rows to " << out.string() << "\n";
}

// ---- atlas ------------------------------------------------------------------------

struct AtlasArgs {
  std::size_t n_mek = 41, n_fwn = 151;
  std::string out, summary;
};

nlohmann::json summary_json(const AtlasSummary& s) {
  nlohmann::json rows = nlohmann::json::array();
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (const auto& r : s.rows)
    rows.push_back({{"m_ek", r.m_ek}, {"first_bistable", opt(r.first_bistable)},
                    {"last_bistable", opt(r.last_bistable)}, {"ordered", r.ordered}});
  return {{"rows", rows},
          {"band_lo", opt(s.band_lo)},
          {"band_hi", opt(s.band_hi)},
          {"band_share", s.band_share(Bounds::experiment().fw_n)},
          {"bistable_fraction", s.bistable_fraction},
          {"non_monotone_cells", s.non_monotone_cells},
          {"coherent", s.coherent()}};
}

void cmd_atlas(const Globals& g, const AtlasArgs& a) {
  ManifestFile mf(g.run() / "manifest.json");
  RunManifest m = start_manifest(g, "atlas");
  const ParamSet ps = load_params(g, mf, m);
  const BoxModelOracle oracle(ps, g.integrator());
  AtlasOptions ao;
  ao.jobs = g.jobs;
  const Atlas atlas = bistability_atlas(AtlasGrid::uniform(Bounds::experiment(), a.n_mek, a.n_fwn), oracle, ao);
  const fs::path out = or_default(a.out, g.run() / "atlas.csv");
  const fs::path summary = or_default(a.summary, g.run() / "atlas_summary.json");
  {
    auto f = io::open_out(out);
    write_atlas_csv(f, atlas);
  }
  const AtlasSummary s = summarize(atlas);
  write_json(summary, summary_json(s));
  m.add_output(out);
  m.add_output(summary);
  mf.record(m);
  mf.save();
  if (s.non_monotone_cells > 0)
    std::cerr << s.non_monotone_cells << " bistable cells without a single separatrix crossing\n";
  std::cout << "bistable share of fw_n range " << s.band_share(Bounds::experiment().fw_n) << "\n";
}

// ---- train ------------------------------------------------------------------------

struct TrainArgs {
  GanSpec spec;
  std::string data, atlas, out, stats;
  int checkpoint_every = 0;
};

std::string run_tag(const GanSpec& s) { return "n" + std::to_string(s.n_generators) + "_s" + std::to_string(s.seed); }

void cmd_train(const Globals& g, const TrainArgs& a) {
  ManifestFile mf(g.run() / "manifest.json");
  RunManifest m = start_manifest(g, "train/" + run_tag(a.spec));
  m.seeds = {a.spec.seed};
  const ParamSet ps = load_params(g, mf, m);
  const Dataset data = load_checked_dataset(or_default(a.data, g.run() / "train.csv"), mf, m,
                                            m.versions["calibration_sha256"].get<std::string>());
  std::optional<Atlas> atlas;
  RegionPredicate region = in_reference_band;
  if (!a.atlas.empty()) {
    atlas = load_checked_atlas(a.atlas, mf, m);
    region = [&atlas](const Config& c) { return in_uncertainty_region(c, *atlas); };
  }
  const BoxModelOracle box(ps, g.integrator());
  const CachedOracle oracle(box);
  TipGan gan(a.spec, data, oracle, region, g.jobs);
  TrainOptions to;
  to.checkpoint = or_default(a.out, g.run() / ("gan_" + run_tag(a.spec) + ".json"));
  to.stats_csv = or_default(a.stats, g.run() / ("stats_" + run_tag(a.spec) + ".csv"));
  to.checkpoint_every = a.checkpoint_every;
  const auto stats = train(gan, to);
  m.add_output(*to.checkpoint);
  m.add_output(*to.stats_csv);
  m.versions["oracle_cache"] = {{"hits", oracle.hits()}, {"misses", oracle.misses()}};
  mf.record(m);
  mf.save();
  std::cout << "trained " << stats.size() << " steps, checkpoint " << to.checkpoint->string() << "\n";
}

// ---- eval -------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string test, train, atlas, out_dir;
  std::size_t count = 2694;
  std::uint64_t seed = 11;
};

std::string model_name(const fs::path& ckpt) { return ckpt.stem().string(); }

void cmd_eval(const Globals& g, const EvalArgs& a) {
  ManifestFile mf(g.run() / "manifest.json");
  RunManifest m = start_manifest(g, "eval");
  m.seeds = {a.seed};
  const ParamSet ps = load_params(g, mf, m);
  const std::string cal = m.versions["calibration_sha256"].get<std::string>();
  const Dataset test = load_checked_dataset(or_default(a.test, g.run() / "test.csv"), mf, m, cal);
  const Dataset train_ds = load_checked_dataset(or_default(a.train, g.run() / "train.csv"), mf, m, cal);
  const Atlas atlas = load_checked_atlas(or_default(a.atlas, g.run() / "atlas.csv"), mf, m);
  const fs::path dir = or_default(a.out_dir, g.run() / "eval");
  const BoxModelOracle oracle(ps, g.integrator());

  nlohmann::json regions = nlohmann::json::array(), clf = nlohmann::json::object();
  std::ostringstream region_csv, clf_csv;
  region_csv << kRegionHeader << "\n";
  clf_csv << kClfHeader << "\n";
  auto add_region = [&](const RegionReport& r) {
    regions.push_back(r.to_json());
    write_region_row(region_csv, r);
  };
  const auto train_cfg = train_ds.configs();
  const auto test_cfg = test.configs();
  add_region(region_occupancy(train_cfg, atlas, "train"));
  add_region(region_occupancy(test_cfg, atlas, "test"));

  std::vector<Label> truth;
  const std::size_t n_test = test.samples.size();
  std::unique_ptr<bool[]> strata(new bool[n_test]);
  for (std::size_t i = 0; i < n_test; ++i) {
    truth.push_back(test.samples[i].label);
    strata[i] = in_uncertainty_region(test.samples[i].config, atlas);
  }

  for (const auto& ck : a.checkpoints) {
    mf.verify_input(ck);
    m.add_input(ck);
    const TrainedModel model = TrainedModel::from_checkpoint(nlohmann::json::parse(io::read_file(ck)));
    const std::string name = model_name(ck);

    const auto gen = generate_mixture(model, a.count, a.seed);
    std::vector<Config> cfg;
    std::vector<int> origin;
    for (const auto& s : gen) {
      cfg.push_back(s.config);
      origin.push_back(s.origin);
    }
    add_region(region_occupancy(cfg, atlas, name, origin));

    const auto outcomes = run_all(oracle, cfg, g.jobs);
    const fs::path dump = dir / ("samples_" + name + ".csv");
    {
      auto f = io::open_out(dump);
      f << kSampleHeader << "\n";
      for (std::size_t i = 0; i < cfg.size(); ++i)
        f << io::fmt(cfg[i].d_low0) << ',' << io::fmt(cfg[i].m_ek) << ',' << io::fmt(cfg[i].fw_n) << ','
          << to_string(outcomes[i].label) << ',' << io::fmt(outcomes[i].final_m_n) << ',' << origin[i] << "\n";
    }
    m.add_output(dump);

    const auto probs = predict_shutoff(model.discriminator, test_cfg, model.spec.bounds);
    std::vector<Label> pred;
    for (double p : probs) pred.push_back(threshold(p));
    const auto reports = classification_report(pred, truth, std::span<const bool>(strata.get(), n_test));
    nlohmann::json rj = nlohmann::json::array();
    for (const auto& r : reports) rj.push_back(r.to_json());
    clf[name] = rj;
    write_clf_rows(clf_csv, name, reports);
  }

  const std::vector<std::pair<std::string, std::string>> files{
      {"region_report.csv", region_csv.str()}, {"clf_report.csv", clf_csv.str()}};
  for (const auto& [file, body] : files) {
    auto f = io::open_out(dir / file);
    f << body;
    f.close();
    m.add_output(dir / file);
  }
  write_json(dir / "region_report.json", {{"membership_default", "atlas"}, {"reports", regions}});
  write_json(dir / "clf_report.json", {{"positive_class", "on"}, {"stratification", "atlas"}, {"models", clf}});
  m.add_output(dir / "region_report.json");
  m.add_output(dir / "clf_report.json");
  mf.record(m);
  mf.save();
  std::cout << region_csv.str() << clf_csv.str();
}

// ---- export-plots -------------------------------------------------------------------

struct ExportArgs {
  std::vector<std::string> checkpoints;
  std::string train, out_dir;
  std::size_t count = 2694;
  std::uint64_t seed = 11;
  std::vector<double> sweep_m_ek{15, 20, 25, 30, 35};
};

void cmd_export(const Globals& g, const ExportArgs& a) {
  ManifestFile mf(g.run() / "manifest.json");
  RunManifest m = start_manifest(g, "export-plots");
  m.seeds = {a.seed};
  const ParamSet ps = load_params(g, mf, m);
  const Dataset train_ds = load_checked_dataset(or_default(a.train, g.run() / "train.csv"), mf, m,
                                                m.versions["calibration_sha256"].get<std::string>());
  const fs::path dir = or_default(a.out_dir, g.run() / "plots");
  const auto real = train_ds.configs();
  auto emit = [&](const fs::path& p, const Histogram& h) {
    auto f = io::open_out(p);
    write_histogram_csv(f, h);
    f.close();
    m.add_output(p);
  };
  for (Coordinate c : kCoordinates) emit(dir / ("hist_" + std::string(to_string(c)) + "_real.csv"), histogram(real, c));
  for (const auto& ck : a.checkpoints) {
    mf.verify_input(ck);
    m.add_input(ck);
    const TrainedModel model = TrainedModel::from_checkpoint(nlohmann::json::parse(io::read_file(ck)));
    std::vector<Config> cfg;
    for (const auto& s : generate_mixture(model, a.count, a.seed)) cfg.push_back(s.config);
    for (Coordinate c : kCoordinates)
      emit(dir / ("hist_" + std::string(to_string(c)) + "_" + model_name(ck) + ".csv"), histogram(cfg, c));
  }
  std::vector<SweepResult> sweeps(a.sweep_m_ek.size());
  SweepOptions so;
  so.integrator = g.integrator();
  parallel_for(sweeps.size(), g.jobs, [&](std::size_t i) {
    sweeps[i] = quasi_static_sweep(ps.params, ps.init_template, a.sweep_m_ek[i], so);
  });
  {
    auto f = io::open_out(dir / "sweeps.csv");
    write_sweep_csv(f, sweeps);
  }
  m.add_output(dir / "sweeps.csv");
  mf.record(m);
  mf.save();
  std::cout << "wrote plot data to " << dir.string() << "\n";
}

int report_error(std::string_view kind, const std::string& message, int code) {
  const nlohmann::json rec{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  std::cerr << rec.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial exploration of overturning collapse in a four-box ocean model"};
  app.set_config("--config", "", "Sectioned key-value run configuration");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--run-dir", g.run_dir, "Directory for outputs and manifest.json")->capture_default_str();
  app.add_option("--params", g.params, "Parameter file (default: <run-dir>/calibrated_params.txt)");
  app.add_option("--jobs", g.jobs, "Worker threads for oracle-heavy stages")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--dt-years", g.dt_years, "Integrator step")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--horizon-years", g.horizon_years, "Integration horizon")->check(CLI::PositiveNumber)->capture_default_str();

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Check (and optionally search for) the base parameter set");
  cal->add_option("--start", ca.start, "Starting parameter file (default: built-in values)");
  cal->add_option("--out", ca.out, "Output parameter file");
  cal->add_option("--report", ca.report, "Calibration report (JSON)");
  cal->add_option("--search-iterations", ca.iterations, "Random-search proposals if targets are missed")->capture_default_str();
  cal->add_option("--bisections", ca.bisections, "Bisection steps for band edges")->capture_default_str();
  cal->add_option("--seed", ca.seed)->capture_default_str();

  DatasetArgs da;
  auto* ds = app.add_subcommand("dataset", "Sample and label a uniform dataset");
  ds->add_option("--count", da.count)->check(CLI::PositiveNumber)->capture_default_str();
  ds->add_option("--seed", da.seed)->capture_default_str();
  ds->add_option("--split", da.split)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  ds->add_option("--out", da.out, "CSV path (sidecar JSON written next to it)");

  AtlasArgs aa;
  auto* at = app.add_subcommand("atlas", "Bistability atlas over (m_ek, fw_n)");
  at->add_option("--n-mek", aa.n_mek)->check(CLI::PositiveNumber)->capture_default_str();
  at->add_option("--n-fwn", aa.n_fwn)->check(CLI::PositiveNumber)->capture_default_str();
  at->add_option("--out", aa.out);
  at->add_option("--summary", aa.summary);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the generators and discriminator");
  tr->add_option("--generators", ta.spec.n_generators)->check(CLI::Range(1, 3))->capture_default_str();
  tr->add_option("--steps", ta.spec.steps)->check(CLI::NonNegativeNumber)->capture_default_str();
  tr->add_option("--batch", ta.spec.batch_size, "Samples per generator per step")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--latent", ta.spec.latent_dim)->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--hidden", ta.spec.hidden)->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--seed", ta.spec.seed)->capture_default_str();
  tr->add_option("--lr-d", ta.spec.lr_discriminator)->capture_default_str();
  tr->add_option("--lr-g", ta.spec.lr_generator)->capture_default_str();
  tr->add_option("--mad-weight", ta.spec.mad_weight)->capture_default_str();
  tr->add_option("--clf-weight", ta.spec.clf_weight)->capture_default_str();
  tr->add_option("--data", ta.data, "Training CSV (default: <run-dir>/train.csv)");
  tr->add_option("--atlas", ta.atlas, "Atlas CSV for in-region statistics (default: fixed band)");
  tr->add_option("--out", ta.out, "Checkpoint path");
  tr->add_option("--stats", ta.stats, "Per-step statistics CSV");
  tr->add_option("--checkpoint-every", ta.checkpoint_every)->check(CLI::NonNegativeNumber)->capture_default_str();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Region occupancy and classification reports");
  ev->add_option("--checkpoint", ea.checkpoints)->required();
  ev->add_option("--test", ea.test);
  ev->add_option("--train", ea.train);
  ev->add_option("--atlas", ea.atlas);
  ev->add_option("--count", ea.count)->capture_default_str();
  ev->add_option("--seed", ea.seed)->capture_default_str();
  ev->add_option("--out-dir", ea.out_dir);

  ExportArgs xa;
  auto* ex = app.add_subcommand("export-plots", "Histogram and sweep data for plotting");
  ex->add_option("--checkpoint", xa.checkpoints);
  ex->add_option("--train", xa.train);
  ex->add_option("--count", xa.count)->capture_default_str();
  ex->add_option("--seed", xa.seed)->capture_default_str();
  ex->add_option("--sweep-m-ek", xa.sweep_m_ek)->capture_default_str();
  ex->add_option("--out-dir", xa.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report_error("Usage", e.what(), 2);
  }

  try {
    if (*cal) cmd_calibrate(g, ca);
    else if (*ds) cmd_dataset(g, da);
    else if (*at) cmd_atlas(g, aa);
    else if (*tr) cmd_train(g, ta);
    else if (*ev) cmd_eval(g, ea);
    else if (*ex) cmd_export(g, xa);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.message(), e.kind() == ErrorKind::Usage ? 2 : 1);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 1);
  }
  return 0;
}
