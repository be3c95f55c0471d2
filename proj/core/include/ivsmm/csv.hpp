#pragma once

#include <string>

#include "ivsmm/dataset.hpp"

namespace ivsmm {

// Reads an RFC-4180-style CSV (UTF-8, mandatory header row, '.' decimal,
// quoted fields allowed).  Rows with an empty cell in any selected column are
// dropped and counted; a non-numeric cell raises CsvParseError with the file
// line.  The instrument column must hold integral values; they are relabelled
// to 0..K-1 in ascending numeric order.
Dataset ingest_csv(const std::string& path, const std::string& outcome,
                   const std::string& exposure, const std::string& instrument);

// Writes the dataset back out with 17 significant digits so a re-ingest
// round-trips bit exactly.  The instrument column carries the raw level
// values.
void write_csv(const Dataset& ds, const std::string& path,
               const std::string& outcome = "y",
               const std::string& exposure = "x",
               const std::string& instrument = "z");

}  // namespace ivsmm
