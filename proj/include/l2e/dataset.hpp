#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "l2e/types.hpp"

namespace l2e {

// Column centering/scaling records kept so standardized fits can be mapped
// back to the original data scale.
struct StandardizeRecord {
    Vector x_center;  // per-column means
    Vector x_scale;   // per-column standard deviations
    double y_center = 0.0;
};

// Dense regression data: response y against design X. Entries are always
// finite; construction and ingestion reject anything else.
struct Dataset {
    Matrix X;
    Vector y;
    std::vector<std::string> column_names;  // X columns then response, may be empty
    bool standardized = false;
    std::optional<StandardizeRecord> transform;

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }

    void validate() const;
};

// Response column selector: a header name or a 0-based position.
using ColumnRef = std::variant<std::string, int>;

// Reads an RFC-4180-style numeric CSV ('.' decimal separator, optional
// header row). The selected column becomes y; remaining columns become X in
// file order. Errors are DataError with distinct codes: missing file,
// non-numeric cell (named by 1-based file row and column), missing response
// column.
Dataset load_csv(const std::string& path, const ColumnRef& response, bool header);

// Writes X columns then y, numbers with 17 significant digits so reading
// the file back reproduces every value exactly.
void write_csv(const Dataset& data, const std::string& path);

// Centers and scales each X column to mean 0 / SD 1 and centers y. Keeps
// the transform record for destandardize. Requires n >= 2; a zero-variance
// column raises a DataError naming it.
Dataset standardize(const Dataset& data);

// Inverse of standardize, exact up to rounding.
Dataset destandardize(const Dataset& data);

// Maps coefficients of a fit on standardized data back to the original
// scale; returns the rescaled coefficients and sets `intercept`.
Vector original_scale_coefficients(const Vector& beta_standardized,
                                   const StandardizeRecord& record,
                                   double* intercept);

}  // namespace l2e
