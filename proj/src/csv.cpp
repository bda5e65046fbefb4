#include "penmix/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "penmix/error.hpp"

namespace penmix {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

std::string quote_if_needed(const std::string& cell) {
    if (cell.find_first_of(",\"") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace

Index CsvTable::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == name) return static_cast<Index>(j);
    return -1;
}

Index CsvTable::require_column(const std::string& name) const {
    const Index j = column_index(name);
    if (j < 0) throw InputError("missing column '" + name + "'");
    return j;
}

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty CSV input");
    table.header = split_line(line);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw InputError("CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return read_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
    auto write_row = [&](const std::vector<std::string>& cells) {
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (j) out << ',';
            out << quote_if_needed(cells[j]);
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) write_row(row);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    write_csv(out, table);
}

std::string format_double(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, end);
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    std::size_t start = cell.find_first_not_of(" \t");
    std::size_t stop = cell.find_last_not_of(" \t");
    if (start == std::string::npos) {
        throw InputError("missing value at row " + std::to_string(row) + ", column '" + column + "'");
    }
    const char* first = cell.data() + start;
    const char* last = cell.data() + stop + 1;
    if (*first == '+') ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw InputError("non-numeric value '" + cell + "' at row " + std::to_string(row) +
                         ", column '" + column + "'");
    }
    return value;
}

Dataset dataset_from_csv(const CsvTable& table, const std::string& response,
                         const ResponseFamily& family) {
    const Index y_col = table.require_column(response);
    const auto n = static_cast<Index>(table.rows.size());
    const auto p = static_cast<Index>(table.header.size()) - 1;
    if (p < 1) throw InputError("no covariate columns besides '" + response + "'");
    MatrixXd X(n, p);
    VectorXd y(n);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < table.header.size(); ++j)
        if (static_cast<Index>(j) != y_col) names.push_back(table.header[j]);
    for (Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        Index c = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double v = parse_cell(row[j], static_cast<std::size_t>(i + 1), table.header[j]);
            if (static_cast<Index>(j) == y_col) {
                y(i) = v;
            } else {
                X(i, c++) = v;
            }
        }
    }
    return make_dataset(X, y, family, std::move(names));
}

} // namespace penmix
