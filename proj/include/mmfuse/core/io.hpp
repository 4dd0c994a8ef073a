#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/core/matrix.hpp"

namespace mmfuse {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// RFC-4180: fields containing comma, quote, or newline are quoted; embedded
// quotes are doubled.
inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

inline std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch == '\r') {
            // tolerate CRLF
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

struct LoadedTable {
    FeatureMatrix matrix;
    std::optional<std::vector<int>> labels;
};

inline double parse_numeric_cell(const std::string& s, std::size_t line_no,
                                 const std::string& col) {
    if (s.empty() || s == "NaN" || s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("row " + std::to_string(line_no) +
                                 ", column '" + col + "': non-numeric cell '" + s + "'");
    }
    if (pos != s.size())
        throw std::runtime_error("row " + std::to_string(line_no) +
                                 ", column '" + col + "': non-numeric cell '" + s + "'");
    return v;
}

inline LoadedTable load_csv_table(const std::string& path,
                                  const std::string& label_column = "") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    const auto header = parse_csv_line(line);
    std::ptrdiff_t label_idx = -1;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!label_column.empty() && header[i] == label_column) label_idx = static_cast<std::ptrdiff_t>(i);
        else names.push_back(header[i]);
    }
    if (!label_column.empty() && label_idx < 0)
        throw std::runtime_error("label column '" + label_column + "' not found in " + path);

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t rows = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = parse_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error("row " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (static_cast<std::ptrdiff_t>(i) == label_idx)
                labels.push_back(static_cast<int>(parse_numeric_cell(fields[i], line_no, header[i])));
            else
                values.push_back(parse_numeric_cell(fields[i], line_no, header[i]));
        }
        ++rows;
    }
    LoadedTable out;
    out.matrix.rows = rows;
    out.matrix.cols = names.size();
    out.matrix.values = std::move(values);
    out.matrix.col_names = std::move(names);
    if (label_idx >= 0) out.labels = std::move(labels);
    return out;
}

inline LoadedTable load_jsonl_table(const std::string& path,
                                    const std::string& label_column = "") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t rows = 0, line_no = 0;
    bool have_labels = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": invalid JSON");
        }
        if (rows == 0) {
            for (auto it = rec.begin(); it != rec.end(); ++it)
                if (it.key() != label_column) names.push_back(it.key());
            have_labels = !label_column.empty() && rec.contains(label_column);
            if (!label_column.empty() && !have_labels)
                throw std::runtime_error("label column '" + label_column + "' not found in " + path);
        }
        for (const auto& name : names) {
            if (!rec.contains(name) || !rec[name].is_number())
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": missing or non-numeric field '" + name + "'");
            values.push_back(rec[name].get<double>());
        }
        if (have_labels) labels.push_back(rec[label_column].get<int>());
        ++rows;
    }
    LoadedTable out;
    out.matrix.rows = rows;
    out.matrix.cols = names.size();
    out.matrix.values = std::move(values);
    out.matrix.col_names = std::move(names);
    if (have_labels) out.labels = std::move(labels);
    return out;
}

inline LoadedTable load_table(const std::string& path, const std::string& format,
                              const std::string& label_column = "") {
    if (format == "csv") return load_csv_table(path, label_column);
    if (format == "jsonl") return load_jsonl_table(path, label_column);
    throw std::invalid_argument("load_table: unknown format '" + format + "'");
}

inline void save_csv_table(const FeatureMatrix& m, const std::string& path,
                           const std::vector<int>* labels = nullptr,
                           const std::string& label_column = "label") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (std::size_t c = 0; c < m.cols; ++c) {
        if (c) out << ',';
        out << csv_escape(m.col_names[c].empty() ? "c" + std::to_string(c) : m.col_names[c]);
    }
    if (labels) out << (m.cols ? "," : "") << label_column;
    out << '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c) out << ',';
            out << format_double(m.at(r, c));
        }
        if (labels) out << (m.cols ? "," : "") << (*labels)[r];
        out << '\n';
    }
}

}  // namespace mmfuse
