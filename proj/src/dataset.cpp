#include "l2e/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace l2e {

namespace {

// Splits one CSV record. Handles quoted fields and trailing CR.
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c == '\r' && i + 1 == line.size()) {
            // tolerate CRLF
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t file_row, std::size_t col) {
    const std::string cell = trim(raw);
    if (!cell.empty()) {
        errno = 0;
        char* end = nullptr;
        const double value = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() + cell.size() && errno == 0 && std::isfinite(value)) {
            return value;
        }
    }
    throw DataError(DataError::Code::bad_cell,
                    "non-numeric cell \"" + cell + "\" at row " +
                        std::to_string(file_row) + ", column " + std::to_string(col + 1));
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void Dataset::validate() const {
    if (y.size() == 0 || X.cols() == 0) {
        throw InvalidArgument("dataset must have at least one row and one column");
    }
    if (X.rows() != y.size()) {
        throw DimensionError("design has " + std::to_string(X.rows()) +
                             " rows but response has " + std::to_string(y.size()));
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw InvalidArgument("dataset contains non-finite entries");
    }
    if (standardized != transform.has_value()) {
        throw InvalidArgument("standardization flag and transform record disagree");
    }
}

Dataset load_csv(const std::string& path, const ColumnRef& response, bool header) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(DataError::Code::missing_file, "cannot open " + path);
    }

    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t file_row = 0;
    std::size_t width = 0;

    while (std::getline(in, line)) {
        ++file_row;
        if (line.empty() && rows.empty() && names.empty()) continue;
        const auto fields = split_record(line);
        if (file_row == 1 && header) {
            for (const auto& f : fields) names.push_back(trim(f));
            width = fields.size();
            continue;
        }
        if (line.empty()) continue;  // tolerate trailing blank line
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw DataError(DataError::Code::bad_format,
                            "row " + std::to_string(file_row) + " has " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(width));
        }
        std::vector<double> values(width);
        for (std::size_t c = 0; c < width; ++c) {
            values[c] = parse_cell(fields[c], file_row, c);
        }
        rows.push_back(std::move(values));
    }

    if (rows.empty() || width == 0) {
        throw DataError(DataError::Code::bad_format, "no data rows in " + path);
    }

    std::size_t response_idx = width;
    if (const auto* name = std::get_if<std::string>(&response)) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (names[c] == *name) {
                response_idx = c;
                break;
            }
        }
        if (response_idx == width) {
            throw DataError(DataError::Code::missing_column,
                            "no column named \"" + *name + "\" in " + path);
        }
    } else {
        const int idx = std::get<int>(response);
        if (idx < 0 || static_cast<std::size_t>(idx) >= width) {
            throw DataError(DataError::Code::missing_column,
                            "response index " + std::to_string(idx) +
                                " out of range for " + std::to_string(width) + " columns");
        }
        response_idx = static_cast<std::size_t>(idx);
    }
    if (width < 2) {
        throw DataError(DataError::Code::bad_format,
                        "need at least one predictor column besides the response");
    }

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index p = static_cast<Eigen::Index>(width - 1);
    Dataset data;
    data.X.resize(n, p);
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index j = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == response_idx) {
                data.y[i] = rows[static_cast<std::size_t>(i)][c];
            } else {
                data.X(i, j++) = rows[static_cast<std::size_t>(i)][c];
            }
        }
    }
    if (!names.empty()) {
        for (std::size_t c = 0; c < width; ++c) {
            if (c != response_idx) data.column_names.push_back(names[c]);
        }
        data.column_names.push_back(names[response_idx]);
    }
    data.validate();
    return data;
}

void write_csv(const Dataset& data, const std::string& path) {
    data.validate();
    std::ofstream out(path);
    if (!out) {
        throw DataError(DataError::Code::missing_file, "cannot write " + path);
    }
    const Eigen::Index p = data.p();
    if (!data.column_names.empty()) {
        for (Eigen::Index j = 0; j < p; ++j) {
            out << data.column_names[static_cast<std::size_t>(j)] << ',';
        }
        out << data.column_names.back() << '\n';
    }
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            out << format_value(data.X(i, j)) << ',';
        }
        out << format_value(data.y[i]) << '\n';
    }
}

Dataset standardize(const Dataset& data) {
    data.validate();
    if (data.n() < 2) {
        throw InvalidArgument("standardization needs at least two rows");
    }
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();

    StandardizeRecord rec;
    rec.x_center = data.X.colwise().mean();
    rec.x_scale.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var =
            (data.X.col(j).array() - rec.x_center[j]).square().sum() / (n - 1.0);
        rec.x_scale[j] = std::sqrt(var);
        if (!(rec.x_scale[j] > 0.0)) {
            const std::string name =
                data.column_names.empty() ? "column " + std::to_string(j)
                                          : data.column_names[static_cast<std::size_t>(j)];
            throw DataError(DataError::Code::constant_column,
                            "constant predictor " + name + " cannot be standardized");
        }
    }
    rec.y_center = data.y.mean();

    Dataset out = data;
    for (Eigen::Index j = 0; j < p; ++j) {
        out.X.col(j) = (data.X.col(j).array() - rec.x_center[j]) / rec.x_scale[j];
    }
    out.y = data.y.array() - rec.y_center;
    out.standardized = true;
    out.transform = rec;
    return out;
}

Dataset destandardize(const Dataset& data) {
    data.validate();
    if (!data.standardized || !data.transform) {
        throw InvalidArgument("dataset is not standardized");
    }
    const StandardizeRecord& rec = *data.transform;
    Dataset out = data;
    for (Eigen::Index j = 0; j < data.p(); ++j) {
        out.X.col(j) = data.X.col(j).array() * rec.x_scale[j] + rec.x_center[j];
    }
    out.y = data.y.array() + rec.y_center;
    out.standardized = false;
    out.transform.reset();
    return out;
}

Vector original_scale_coefficients(const Vector& beta_standardized,
                                   const StandardizeRecord& record,
                                   double* intercept) {
    if (beta_standardized.size() != record.x_scale.size()) {
        throw DimensionError("coefficients (" + std::to_string(beta_standardized.size()) +
                             ") and transform record (" +
                             std::to_string(record.x_scale.size()) + ") disagree");
    }
    Vector beta = beta_standardized.cwiseQuotient(record.x_scale);
    if (intercept != nullptr) {
        *intercept = record.y_center - beta.dot(record.x_center);
    }
    return beta;
}

}  // namespace l2e
