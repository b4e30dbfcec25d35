#pragma once

#include <string>

#include "study.hpp"

namespace emcs {

// "%.17g"; the decimal separator is always '.'.
std::string FormatNumber(double v);

std::string ValidityReportJson(const StudyRecord& study);
std::string RunManifestJson(const StudyRecord& study);

// Writes validity_report.json, true_performance.csv, performance_<design>.csv,
// selections.csv, point_estimates.csv, failures.csv, run_manifest.json (and
// replicates_<design>.csv when configured) into `output_dir`.
void EmitReport(const StudyRecord& study, const std::string& output_dir);

const char* LibraryVersion();

}  // namespace emcs
