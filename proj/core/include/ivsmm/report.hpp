#pragma once

#include <string>

#include "ivsmm/estimator.hpp"
#include "ivsmm/late.hpp"
#include "ivsmm/simulate.hpp"

namespace ivsmm {

// Where the data came from; echoed in every report.
struct Provenance {
  std::string file;
  std::string outcome;
  std::string exposure;
  std::string instrument;
  Index n = 0;
  std::size_t dropped_rows = 0;
  std::string encoding;  // "indicators" or "raw"
};

// JSON renderings (schema 1, stable key order, UTF-8).  Exponentiated
// intervals are transforms of the raw endpoints.
std::string fit_report_json(const GmmFit& fit, const Provenance& prov);
std::string fit_report_text(const GmmFit& fit, const Provenance& prov);

std::string mc_summary_json(const McSummary& summary,
                            const std::string& design_name);
std::string mc_summary_text(const McSummary& summary,
                            const std::string& design_name);

std::string decomposition_json(const LateDecomposition& d,
                               const Provenance& prov);
std::string decomposition_text(const LateDecomposition& d,
                               const Provenance& prov);

std::string population_json(const ProbitPopulation& pop);
std::string population_text(const ProbitPopulation& pop);

}  // namespace ivsmm
