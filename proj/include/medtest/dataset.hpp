#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace medtest {

/// Conditioning-set variant of the test (see crossfit_means).
enum class Variant { baseline, z2linked, posttreatment };

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

/// Columnar sample. Instrument and covariate blocks may have several columns;
/// `w` has zero columns when no post-treatment covariates are present.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::VectorXd m;
    Eigen::MatrixXd z1;
    Eigen::MatrixXd z2;
    Eigen::MatrixXd x;
    Eigen::MatrixXd w;

    Eigen::Index n() const { return y.size(); }
    bool has_w() const { return w.cols() > 0; }

    /// Throws data_error on length mismatch, empty instruments or non-finite values.
    void validate() const;

    /// Rows in `rows`, in that order.
    Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// Numeric table read from CSV with a mandatory header line.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;

    /// Column index by name; throws data_error naming the column if absent.
    Eigen::Index column(std::string_view name) const;
};

/// Parses CSV text. Empty cells, NA, NaN and "." are rejected as missing
/// values; errors name the source, line and column.
CsvTable parse_csv(std::string_view text, std::string_view source = "<input>");
CsvTable read_csv(const std::filesystem::path& path);

/// Expands a column specification: comma-separated names, where an item
/// of the form `x1..x200` stands for x1, x2, ..., x200.
std::vector<std::string> expand_columns(std::string_view spec);

/// Role -> column names mapping for building a Dataset from a table.
struct ColumnMap {
    std::string y;
    std::string d;
    std::string m;
    std::vector<std::string> z1;
    std::vector<std::string> z2;
    std::vector<std::string> x;
    std::vector<std::string> w;
};

Dataset dataset_from_table(const CsvTable& table, const ColumnMap& columns);

/// Writes `y,d,m,z1,z2,x1..xp` (and `w1..wq` when present; multi-column
/// instruments are numbered z1_1, z1_2, ...).
void write_csv(std::ostream& out, const Dataset& data);

/// Default column mapping matching write_csv's header for a table.
ColumnMap default_columns(const CsvTable& table);

}  // namespace medtest
