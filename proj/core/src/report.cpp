#include "ivsmm/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ivsmm {

namespace {

using json = nlohmann::ordered_json;

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json provenance_json(const Provenance& prov) {
  json j;
  j["file"] = prov.file;
  j["outcome"] = prov.outcome;
  j["exposure"] = prov.exposure;
  j["instrument"] = prov.instrument;
  j["n"] = prov.n;
  j["dropped_rows"] = prov.dropped_rows;
  j["encoding"] = prov.encoding;
  return j;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%12.6g", v);
  return buf;
}

const char* form_name(DecompositionForm f) {
  switch (f) {
    case DecompositionForm::late: return "late";
    case DecompositionForm::lrr: return "lrr";
    case DecompositionForm::ilrr: return "ilrr";
  }
  return {};
}

}  // namespace

std::string fit_report_json(const GmmFit& fit, const Provenance& prov) {
  json j;
  j["schema"] = 1;
  j["command"] = "fit";
  j["model"] = fit.model;
  j["steps"] = fit.steps;
  j["data"] = provenance_json(prov);
  json estimates = json::array();
  for (std::size_t k = 0; k < fit.params.size(); ++k) {
    const Index i = static_cast<Index>(k);
    json e;
    e["name"] = fit.params[k].name;
    e["estimate"] = fit.theta[i];
    e["se"] = fit.std_errors[i];
    e["ci95"] = json::array({fit.ci95[k].first, fit.ci95[k].second});
    if (fit.params[k].exp_scale) {
      json ex;
      ex["estimate"] = std::exp(fit.theta[i]);
      ex["ci95"] = json::array(
          {std::exp(fit.ci95[k].first), std::exp(fit.ci95[k].second)});
      e["exp"] = ex;
    }
    estimates.push_back(e);
  }
  j["estimates"] = estimates;
  if (fit.j_statistic) {
    json jt;
    jt["statistic"] = *fit.j_statistic;
    jt["df"] = fit.j_df;
    jt["p_value"] = *fit.j_pvalue;
    j["hansen_j"] = jt;
  } else {
    j["hansen_j"] = nullptr;
  }
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["objective"] = fit.objective;
  j["notes"] = fit.notes;
  return j.dump(2) + "\n";
}

std::string fit_report_text(const GmmFit& fit, const Provenance& prov) {
  std::ostringstream out;
  out << "model: " << fit.model << "  (" << fit.steps
      << (fit.steps == 1 ? "-step" : "-step") << " GMM)\n";
  out << "data:  " << (prov.file.empty() ? "<memory>" : prov.file)
      << "  n=" << prov.n << "  dropped=" << prov.dropped_rows << "\n";
  out << "              estimate           se                95% CI\n";
  for (std::size_t k = 0; k < fit.params.size(); ++k) {
    const Index i = static_cast<Index>(k);
    out << "  " << fit.params[k].name;
    for (std::size_t pad = fit.params[k].name.size(); pad < 10; ++pad) {
      out << ' ';
    }
    out << fmt(fit.theta[i]) << " " << fmt(fit.std_errors[i]) << "   ["
        << fmt(fit.ci95[k].first) << ", " << fmt(fit.ci95[k].second) << "]\n";
    if (fit.params[k].exp_scale) {
      out << "  exp(" << fit.params[k].name << ")";
      for (std::size_t pad = fit.params[k].name.size() + 5; pad < 10; ++pad) {
        out << ' ';
      }
      out << fmt(std::exp(fit.theta[i])) << " " << std::string(12, ' ')
          << "   [" << fmt(std::exp(fit.ci95[k].first)) << ", "
          << fmt(std::exp(fit.ci95[k].second)) << "]\n";
    }
  }
  if (fit.j_statistic) {
    out << "Hansen J = " << *fit.j_statistic << "  df = " << fit.j_df
        << "  p = " << *fit.j_pvalue << "\n";
  } else {
    out << "Hansen J: not available (just-identified or one-step fit)\n";
  }
  out << "converged = " << (fit.converged ? "yes" : "NO")
      << "  iterations = " << fit.iterations
      << "  objective = " << fit.objective << "\n";
  for (const std::string& note : fit.notes) out << "note: " << note << "\n";
  return out.str();
}

std::string mc_summary_json(const McSummary& s,
                            const std::string& design_name) {
  json j;
  j["schema"] = 1;
  j["command"] = "simulate";
  j["design"] = design_name;
  j["estimator"] = s.estimator;
  j["n"] = s.n;
  j["reps"] = s.reps;
  j["reps_used"] = s.reps_used;
  j["failed"] = s.failed;
  j["unreliable"] = s.unreliable;
  j["seed"] = s.seed;
  json stats = json::array();
  for (std::size_t k = 0; k < s.stat_names.size(); ++k) {
    const Index i = static_cast<Index>(k);
    json e;
    e["name"] = s.stat_names[k];
    e["mean"] = s.mean[i];
    e["sd"] = s.sd.size() > i ? json(s.sd[i]) : json(nullptr);
    e["mean_se"] = number_or_null(s.mean_se[i]);
    stats.push_back(e);
  }
  j["stats"] = stats;
  j["hansen_j_mean"] = number_or_null(s.j_mean);
  j["hansen_j_rejection_5pct"] = number_or_null(s.j_rejection_5pct);
  return j.dump(2) + "\n";
}

std::string mc_summary_text(const McSummary& s,
                            const std::string& design_name) {
  std::ostringstream out;
  out << "design " << design_name << "  estimator " << s.estimator
      << "  n=" << s.n << "  reps=" << s.reps << " (used " << s.reps_used
      << ", failed " << s.failed << (s.unreliable ? ", UNRELIABLE" : "")
      << ")  seed=" << s.seed << "\n";
  out << "                    mean            sd       mean(se)\n";
  for (std::size_t k = 0; k < s.stat_names.size(); ++k) {
    const Index i = static_cast<Index>(k);
    out << "  " << s.stat_names[k];
    for (std::size_t pad = s.stat_names[k].size(); pad < 16; ++pad) out << ' ';
    out << fmt(s.mean[i]) << " "
        << (s.sd.size() > i ? fmt(s.sd[i]) : std::string(12, ' ')) << " "
        << (std::isfinite(s.mean_se[i]) ? fmt(s.mean_se[i])
                                        : std::string(12, ' '))
        << "\n";
  }
  if (std::isfinite(s.j_mean)) {
    out << "Hansen J mean = " << s.j_mean
        << "  rejection at 5% = " << s.j_rejection_5pct << "\n";
  }
  return out.str();
}

std::string decomposition_json(const LateDecomposition& d,
                               const Provenance& prov) {
  json j;
  j["schema"] = 1;
  j["command"] = "decompose";
  j["form"] = form_name(d.form);
  j["data"] = provenance_json(prov);
  j["level_order"] = d.level_order;
  j["level_probs"] = vector_to_json(d.level_probs);
  j["mean_x"] = vector_to_json(d.mean_x);
  j["adjacent_estimates"] = vector_to_json(d.adjacent);
  j["weights"] = vector_to_json(d.weights);
  j["weighted_average"] = d.weighted_average;
  j["monotonicity_ok"] = d.monotonicity_ok;
  j["weights_in_unit_interval"] = d.weights_in_unit_interval;
  j["positivity_ok"] = d.positivity_ok;
  return j.dump(2) + "\n";
}

std::string decomposition_text(const LateDecomposition& d,
                               const Provenance& prov) {
  std::ostringstream out;
  out << "decomposition " << form_name(d.form) << "  n=" << prov.n << "\n";
  out << "  levels by E(X|Z):";
  for (int l : d.level_order) out << " " << l;
  out << "\n  adjacent estimates:";
  for (Index i = 0; i < d.adjacent.size(); ++i) out << fmt(d.adjacent[i]);
  out << "\n  weights:          ";
  for (Index i = 0; i < d.weights.size(); ++i) out << fmt(d.weights[i]);
  out << "\n  weighted average: " << d.weighted_average << "\n";
  out << "  flags: monotonicity=" << (d.monotonicity_ok ? "ok" : "FAIL")
      << " weights_in_[0,1]=" << (d.weights_in_unit_interval ? "ok" : "FAIL")
      << " positivity=" << (d.positivity_ok ? "ok" : "FAIL") << "\n";
  return out.str();
}

std::string population_json(const ProbitPopulation& pop) {
  json j;
  j["schema"] = 1;
  j["command"] = "simulate";
  j["population"] = true;
  j["lrr"] = vector_to_json(pop.lrr);
  j["tau"] = vector_to_json(pop.tau);
  j["weighted_average"] = pop.weighted_average;
  return j.dump(2) + "\n";
}

std::string population_text(const ProbitPopulation& pop) {
  std::ostringstream out;
  out << "population local risk ratios:";
  for (Index i = 0; i < pop.lrr.size(); ++i) out << fmt(pop.lrr[i]);
  out << "\npopulation tau weights:      ";
  for (Index i = 0; i < pop.tau.size(); ++i) out << fmt(pop.tau[i]);
  out << "\nweighted average:            " << pop.weighted_average << "\n";
  return out.str();
}

}  // namespace ivsmm
