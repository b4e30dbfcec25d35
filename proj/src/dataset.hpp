#pragma once

#include <string>
#include <string_view>

#include "config.hpp"
#include "sample.hpp"

namespace emcs {

// Reads a header-first numeric CSV into a Sample: outcome and treatment from
// the named columns, covariates in schema order. Extra columns are ignored.
Sample LoadDatasetCsv(const std::string& path, const DatasetSchema& schema);
Sample ParseDatasetCsv(std::string_view text, const DatasetSchema& schema);

}  // namespace emcs
