#include "medtest/dataset.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "medtest/error.hpp"

namespace medtest {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i < line.size() && line[i] == '"') quoted = !quoted;
        if (i == line.size() || (line[i] == ',' && !quoted)) {
            auto field = trim(line.substr(start, i - start));
            if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
                field = field.substr(1, field.size() - 2);
            }
            out.push_back(field);
            start = i + 1;
        }
    }
    return out;
}

bool is_missing(std::string_view cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "." || cell == "null";
}

void check_finite(const Eigen::MatrixXd& m, const char* role) {
    if (!m.allFinite()) throw data_error(std::string("non-finite value in ") + role);
}

Eigen::MatrixXd gather(const CsvTable& table, const std::vector<std::string>& names) {
    Eigen::MatrixXd out(table.values.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        out.col(static_cast<Eigen::Index>(j)) = table.values.col(table.column(names[j]));
    }
    return out;
}

void write_number(std::ostream& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

std::vector<std::string> block_names(std::string_view stem, Eigen::Index cols, bool numbered_always) {
    std::vector<std::string> out;
    if (cols == 1 && !numbered_always) {
        out.emplace_back(stem);
        return out;
    }
    const std::string sep = numbered_always ? "" : "_";
    for (Eigen::Index j = 1; j <= cols; ++j) out.push_back(std::string(stem) + sep + std::to_string(j));
    return out;
}

}  // namespace

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::z2linked: return "z2linked";
        case Variant::posttreatment: return "posttreatment";
    }
    return "";
}

std::optional<Variant> parse_variant(std::string_view name) {
    for (Variant v : {Variant::baseline, Variant::z2linked, Variant::posttreatment}) {
        if (variant_name(v) == name) return v;
    }
    return std::nullopt;
}

void Dataset::validate() const {
    const Eigen::Index rows = n();
    if (d.size() != rows || m.size() != rows || z1.rows() != rows || z2.rows() != rows || x.rows() != rows ||
        (w.cols() > 0 && w.rows() != rows)) {
        throw data_error("dataset columns have different lengths");
    }
    if (z1.cols() == 0 || z2.cols() == 0) throw data_error("dataset needs at least one column for each instrument");
    check_finite(y, "y");
    check_finite(d, "d");
    check_finite(m, "m");
    check_finite(z1, "z1");
    check_finite(z2, "z2");
    check_finite(x, "x");
    check_finite(w, "w");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    out.y = y(rows);
    out.d = d(rows);
    out.m = m(rows);
    out.z1 = z1(rows, Eigen::all);
    out.z2 = z2(rows, Eigen::all);
    out.x = x(rows, Eigen::all);
    out.w = w.cols() > 0 ? Eigen::MatrixXd(w(rows, Eigen::all)) : Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), 0);
    return out;
}

Eigen::Index CsvTable::column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw data_error("no column named '" + std::string(name) + "'");
}

CsvTable parse_csv(std::string_view text, std::string_view source) {
    CsvTable table;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    const std::string where(source);
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (!have_header) {
            for (auto f : fields) {
                if (f.empty()) throw data_error(where + ":" + std::to_string(line_no) + ": empty column name in header");
                table.header.emplace_back(f);
            }
            for (std::size_t j = 0; j < table.header.size(); ++j) {
                for (std::size_t k = 0; k < j; ++k) {
                    if (table.header[j] == table.header[k]) {
                        throw data_error(where + ": duplicate column '" + table.header[j] + "'");
                    }
                }
            }
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw data_error(where + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        }
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const auto cell = fields[j];
            const std::string loc = where + ":" + std::to_string(line_no) + ", column '" + table.header[j] + "'";
            if (is_missing(cell)) throw data_error(loc + ": missing value");
            const char* first = cell.data();
            if (*first == '+') ++first;
            const auto res = std::from_chars(first, cell.data() + cell.size(), row[j]);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw data_error(loc + ": not a number: '" + std::string(cell) + "'");
            }
            if (!std::isfinite(row[j])) throw data_error(loc + ": non-finite value");
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) throw data_error(where + ": missing header line");
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open data file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), path.string());
}

std::vector<std::string> expand_columns(std::string_view spec) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        auto end = spec.find(',', pos);
        if (end == std::string_view::npos) end = spec.size();
        const auto item = trim(spec.substr(pos, end - pos));
        pos = end + 1;
        if (item.empty()) continue;
        const auto dots = item.find("..");
        if (dots == std::string_view::npos) {
            out.emplace_back(item);
            continue;
        }
        const auto lo = item.substr(0, dots);
        const auto hi = item.substr(dots + 2);
        auto digits_at = [](std::string_view s) {
            auto k = s.size();
            while (k > 0 && std::isdigit(static_cast<unsigned char>(s[k - 1]))) --k;
            return k;
        };
        const auto split_lo = digits_at(lo), split_hi = digits_at(hi);
        if (split_lo == lo.size() || split_hi == hi.size() || lo.substr(0, split_lo) != hi.substr(0, split_hi)) {
            throw data_error("malformed column range '" + std::string(item) + "'");
        }
        long first = 0, last = 0;
        std::from_chars(lo.data() + split_lo, lo.data() + lo.size(), first);
        std::from_chars(hi.data() + split_hi, hi.data() + hi.size(), last);
        if (last < first) throw data_error("empty column range '" + std::string(item) + "'");
        const std::string stem(lo.substr(0, split_lo));
        for (long k = first; k <= last; ++k) out.push_back(stem + std::to_string(k));
    }
    return out;
}

Dataset dataset_from_table(const CsvTable& table, const ColumnMap& columns) {
    if (columns.y.empty() || columns.d.empty() || columns.m.empty() || columns.z1.empty() || columns.z2.empty()) {
        throw data_error("column mapping must name y, d, m, z1 and z2");
    }
    Dataset data;
    data.y = table.values.col(table.column(columns.y));
    data.d = table.values.col(table.column(columns.d));
    data.m = table.values.col(table.column(columns.m));
    data.z1 = gather(table, columns.z1);
    data.z2 = gather(table, columns.z2);
    data.x = gather(table, columns.x);
    data.w = gather(table, columns.w);
    data.validate();
    return data;
}

void write_csv(std::ostream& out, const Dataset& data) {
    std::vector<std::string> names = {"y", "d", "m"};
    for (auto& s : block_names("z1", data.z1.cols(), false)) names.push_back(s);
    for (auto& s : block_names("z2", data.z2.cols(), false)) names.push_back(s);
    for (auto& s : block_names("x", data.x.cols(), true)) names.push_back(s);
    for (auto& s : block_names("w", data.w.cols(), true)) names.push_back(s);
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        write_number(out, data.y(i));
        out << ',';
        write_number(out, data.d(i));
        out << ',';
        write_number(out, data.m(i));
        for (const Eigen::MatrixXd* block : {&data.z1, &data.z2, &data.x, &data.w}) {
            for (Eigen::Index j = 0; j < block->cols(); ++j) {
                out << ',';
                write_number(out, (*block)(i, j));
            }
        }
        out << '\n';
    }
}

ColumnMap default_columns(const CsvTable& table) {
    ColumnMap map{"y", "d", "m", {}, {}, {}, {}};
    for (const auto& name : table.header) {
        auto numbered = [&](std::string_view stem) {
            if (!name.starts_with(stem) || name.size() == stem.size()) return false;
            const auto rest = std::string_view(name).substr(stem.size());
            return rest.find_first_not_of("0123456789") == std::string_view::npos;
        };
        if (name == "z1" || name.starts_with("z1_")) map.z1.push_back(name);
        else if (name == "z2" || name.starts_with("z2_")) map.z2.push_back(name);
        else if (numbered("x")) map.x.push_back(name);
        else if (numbered("w")) map.w.push_back(name);
    }
    return map;
}

}  // namespace medtest
