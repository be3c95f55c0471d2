// Command line front end: fit SMMs from CSV files, run the Monte Carlo
// designs, and print instrument-increment decompositions.
//
// Exit codes: 0 success, 2 data/model input error, 3 degenerate instrument,
// 4 non-convergence, 5 singular weight matrix.

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ivsmm/csv.hpp"
#include "ivsmm/errors.hpp"
#include "ivsmm/estimator.hpp"
#include "ivsmm/late.hpp"
#include "ivsmm/report.hpp"
#include "ivsmm/simulate.hpp"

namespace {

constexpr int kExitData = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitSingularWeight = 5;

struct FitOptions {
  std::string data, outcome = "y", exposure = "x", instrument = "z";
  std::string model = "additive";
  int steps = 2;
  bool expanded = false;
  std::string encode = "indicators";
  double collapse_tol = -1.0;
  std::string json_path;
};

struct SimOptions {
  std::string design = "m1";
  std::string config_path;
  long long n = 10000;
  int reps = 1000;
  unsigned long long seed = 20240901ULL;
  std::string estimator = "mult-ratio";
  int steps = 2;
  bool expanded = false;
  std::vector<std::string> perturb;
  bool population = false;
  int threads = 0;
  std::string json_path;
};

struct DecompOptions {
  std::string data, outcome = "y", exposure = "x", instrument = "z";
  std::string form = "late";
  std::string json_path;
};

void write_json(const std::string& path, const std::string& payload) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ivsmm::Error("cannot open '" + path + "' for writing");
  out << payload;
}

ivsmm::InstrumentCoding coding_of(const std::string& encode) {
  if (encode == "indicators") {
    return ivsmm::InstrumentCoding::orthogonal_indicators;
  }
  if (encode == "raw") return ivsmm::InstrumentCoding::raw_multivalued;
  throw ivsmm::Error("--encode must be 'indicators' or 'raw'");
}

int run_fit(const FitOptions& opt) {
  ivsmm::Dataset ds =
      ivsmm::ingest_csv(opt.data, opt.outcome, opt.exposure, opt.instrument);
  if (opt.collapse_tol >= 0.0) {
    // Merge levels with equal first-stage predictions of the exposure.
    const ivsmm::LevelStats st = ivsmm::level_stats(ds);
    ivsmm::Vector predicted(ds.n());
    for (ivsmm::Index i = 0; i < ds.n(); ++i) {
      predicted[i] = st.mean_x[ds.z[i]];
    }
    auto [merged, rep] =
        ivsmm::collapse_equivalent_levels(ds, predicted, opt.collapse_tol);
    if (rep.merged_any()) {
      std::cout << "collapsed " << rep.levels_before << " instrument levels to "
                << rep.levels_after << "\n";
    }
    ds = std::move(merged);
  }
  ivsmm::GmmFit fit = ivsmm::fit_named_estimator(
      ds, opt.model, opt.steps, opt.expanded, coding_of(opt.encode));

  ivsmm::Provenance prov;
  prov.file = opt.data;
  prov.outcome = opt.outcome;
  prov.exposure = opt.exposure;
  prov.instrument = opt.instrument;
  prov.n = ds.n();
  prov.dropped_rows = ds.dropped_rows;
  prov.encoding = opt.encode;

  std::cout << ivsmm::fit_report_text(fit, prov);
  write_json(opt.json_path, ivsmm::fit_report_json(fit, prov));
  if (!fit.converged) {
    std::cerr << "error: estimator did not converge within the iteration "
                 "limit; reporting the best iterate\n";
    return kExitNoConvergence;
  }
  return 0;
}

ivsmm::SimDesign build_design(const SimOptions& opt) {
  ivsmm::SimDesign design;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw ivsmm::Error("cannot open '" + opt.config_path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    design = ivsmm::design_from_config(text.str());
  } else if (opt.design == "m1") {
    design = ivsmm::m1_design();
  } else if (opt.design == "m2") {
    design = ivsmm::m2_design();
  } else if (opt.design == "probit-late") {
    design = ivsmm::probit_design();
  } else {
    throw ivsmm::InvalidDesignError("unknown design '" + opt.design + "'");
  }
  for (const std::string& kv : opt.perturb) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ivsmm::InvalidDesignError("--perturb expects key=value, got '" +
                                      kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw ivsmm::InvalidDesignError("perturbation value is not numeric: '" +
                                      kv + "'");
    }
    if (key == "phi_on_z1") {
      design.perturb.phi_on_z1 = value;
    } else if (key == "tau_on_z1") {
      design.perturb.tau_on_z1 = value;
    } else if (key == "tau_on_z2") {
      design.perturb.tau_on_z2 = value;
    } else {
      throw ivsmm::InvalidDesignError("unknown perturbation '" + key + "'");
    }
  }
  return design;
}

int run_simulate(const SimOptions& opt) {
  ivsmm::SimDesign design = build_design(opt);
  const std::string design_name = opt.config_path.empty()
                                      ? opt.design
                                      : "config:" + opt.config_path;
  if (opt.population) {
    const ivsmm::ProbitPopulation pop =
        ivsmm::probit_population_quantities(design);
    std::cout << ivsmm::population_text(pop);
    write_json(opt.json_path, ivsmm::population_json(pop));
    return 0;
  }
  if (opt.reps < 1) {
    throw ivsmm::Error("--reps must be at least 1");
  }
  ivsmm::EstimatorSpec spec;
  spec.name = opt.estimator;
  spec.steps = opt.steps;
  spec.expanded = opt.expanded;
  const ivsmm::McSummary summary = ivsmm::run_replications(
      design, spec, opt.reps, static_cast<ivsmm::Index>(opt.n), opt.seed,
      opt.threads);
  std::cout << ivsmm::mc_summary_text(summary, design_name);
  write_json(opt.json_path, ivsmm::mc_summary_json(summary, design_name));
  return 0;
}

int run_decompose(const DecompOptions& opt) {
  const ivsmm::Dataset ds =
      ivsmm::ingest_csv(opt.data, opt.outcome, opt.exposure, opt.instrument);
  ivsmm::LateDecomposition d;
  if (opt.form == "late") {
    d = ivsmm::late_decomposition(ds);
  } else if (opt.form == "lrr") {
    d = ivsmm::lrr_decomposition(ds);
  } else if (opt.form == "ilrr") {
    d = ivsmm::ilrr_decomposition(ds);
  } else {
    throw ivsmm::Error("--form must be late, lrr or ilrr");
  }
  ivsmm::Provenance prov;
  prov.file = opt.data;
  prov.outcome = opt.outcome;
  prov.exposure = opt.exposure;
  prov.instrument = opt.instrument;
  prov.n = ds.n();
  prov.dropped_rows = ds.dropped_rows;
  prov.encoding = "indicators";
  std::cout << ivsmm::decomposition_text(d, prov);
  write_json(opt.json_path, ivsmm::decomposition_json(d, prov));
  return 0;
}

int classify_error(const std::exception& e) {
  if (dynamic_cast<const ivsmm::DegenerateInstrumentError*>(&e) != nullptr ||
      dynamic_cast<const ivsmm::DegenerateIncrementError*>(&e) != nullptr) {
    return kExitDegenerate;
  }
  if (dynamic_cast<const ivsmm::SingularWeightError*>(&e) != nullptr ||
      dynamic_cast<const ivsmm::SingularMatrixError*>(&e) != nullptr) {
    return kExitSingularWeight;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structural mean models with multiple instruments via GMM"};
  app.require_subcommand(1);

  FitOptions fit_opt;
  CLI::App* fit = app.add_subcommand("fit", "estimate an SMM from a CSV file");
  fit->add_option("--data", fit_opt.data, "CSV file")->required();
  fit->add_option("--outcome", fit_opt.outcome, "outcome column");
  fit->add_option("--exposure", fit_opt.exposure, "exposure column");
  fit->add_option("--instrument", fit_opt.instrument, "instrument column");
  fit->add_option("--model", fit_opt.model,
                  "additive|mult|mult-log|mult-ratio|logistic|logistic-2sgmm")
      ->required();
  fit->add_option("--steps", fit_opt.steps, "1 or 2")
      ->check(CLI::IsMember({1, 2}));
  fit->add_flag("--expanded", fit_opt.expanded,
                "expanded moments with jointly estimated instrument means");
  fit->add_option("--encode", fit_opt.encode, "indicators|raw");
  fit->add_option("--collapse-tol", fit_opt.collapse_tol,
                  "merge levels with first-stage predictions this close");
  fit->add_option("--json", fit_opt.json_path, "write a JSON report here");

  SimOptions sim_opt;
  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study");
  sim->add_option("--design", sim_opt.design, "m1|m2|probit-late");
  sim->add_option("--config", sim_opt.config_path,
                  "key=value design file (overrides --design)");
  sim->add_option("--n", sim_opt.n, "sample size per replication");
  sim->add_option("--reps", sim_opt.reps, "number of replications");
  sim->add_option("--seed", sim_opt.seed, "master seed");
  sim->add_option("--estimator", sim_opt.estimator,
                  "fit estimators plus late|lrr|ilrr");
  sim->add_option("--steps", sim_opt.steps, "1 or 2")
      ->check(CLI::IsMember({1, 2}));
  sim->add_flag("--expanded", sim_opt.expanded, "expanded moment systems");
  sim->add_option("--perturb", sim_opt.perturb,
                  "phi_on_z1=V | tau_on_z1=V | tau_on_z2=V");
  sim->add_flag("--population", sim_opt.population,
                "print probit-design population quantities and exit");
  sim->add_option("--threads", sim_opt.threads,
                  "worker threads (0 = hardware)");
  sim->add_option("--json", sim_opt.json_path, "write a JSON summary here");

  DecompOptions dec_opt;
  CLI::App* dec =
      app.add_subcommand("decompose", "instrument-increment decompositions");
  dec->add_option("--data", dec_opt.data, "CSV file")->required();
  dec->add_option("--outcome", dec_opt.outcome, "outcome column");
  dec->add_option("--exposure", dec_opt.exposure, "exposure column");
  dec->add_option("--instrument", dec_opt.instrument, "instrument column");
  dec->add_option("--form", dec_opt.form, "late|lrr|ilrr");
  dec->add_option("--json", dec_opt.json_path, "write a JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }

  try {
    if (fit->parsed()) return run_fit(fit_opt);
    if (sim->parsed()) return run_simulate(sim_opt);
    if (dec->parsed()) return run_decompose(dec_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_error(e);
  }
  return 0;
}
