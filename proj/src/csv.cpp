#include "ivbounds/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "ivbounds/error.hpp"

namespace ivbounds {

namespace {

// Reads one record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t line) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (;;) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) {
            if (quoted) {
                throw DataError(DataErrorCode::bad_column,
                                "CSV: unterminated quoted field starting on line " + std::to_string(line));
            }
            fields.push_back(field);
            return true;
        }
        const char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"' && field.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
            was_quoted = false;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && in.peek() == '\n') in.get();
            fields.push_back(field);
            return true;
        } else {
            field += ch;
        }
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return j;
    }
    throw DataError(DataErrorCode::bad_column, "CSV: no column named '" + name + "'");
}

Eigen::VectorXd CsvTable::numeric(const std::string& name) const {
    const std::size_t j = column(name);
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string cell = trim(rows[i][j]);
        if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN") {
            out(static_cast<Eigen::Index>(i)) = std::nan("");
            continue;
        }
        double v = 0.0;
        const char* first = cell.data();
        const char* last = cell.data() + cell.size();
        if (*first == '+') ++first;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) {
            throw DataError(DataErrorCode::bad_column, "CSV: column '" + name + "' row " + std::to_string(i + 1) +
                                                           " is not numeric: '" + cell + "'");
        }
        out(static_cast<Eigen::Index>(i)) = v;
    }
    return out;
}

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::size_t line = 1;
    if (!read_record(in, t.header, line)) throw DataError(DataErrorCode::bad_column, "CSV: missing header row");
    std::set<std::string> seen;
    for (auto& h : t.header) {
        h = trim(h);
        if (h.empty()) throw DataError(DataErrorCode::bad_column, "CSV: empty column name in header");
        if (!seen.insert(h).second) {
            throw DataError(DataErrorCode::bad_column, "CSV: duplicate column name '" + h + "'");
        }
    }
    std::vector<std::string> fields;
    while (read_record(in, fields, ++line)) {
        if (fields.size() == 1 && fields[0].empty() && t.header.size() > 1) continue;
        if (fields.size() != t.header.size()) {
            throw DataError(DataErrorCode::bad_column, "CSV: record " + std::to_string(line) + " has " +
                                                           std::to_string(fields.size()) + " fields, header has " +
                                                           std::to_string(t.header.size()));
        }
        t.rows.push_back(fields);
    }
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorCode::bad_column, "cannot open '" + path + "'");
    return read_csv(in);
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t j = 0; j < fields.size(); ++j) {
        if (j) out << ',';
        const std::string& f = fields[j];
        if (f.find_first_of(",\"\r\n") == std::string::npos) {
            out << f;
            continue;
        }
        out << '"';
        for (char c : f) {
            if (c == '"') out << '"';
            out << c;
        }
        out << '"';
    }
    out << '\n';
}

}  // namespace ivbounds
