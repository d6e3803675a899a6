#pragma once

#include "pcstable/core.hpp"
#include "pcstable/orient.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace pcstable::io {

/// Malformed input file. row/column are 1-based positions in the file when
/// they apply, 0 otherwise.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string what, std::size_t row = 0, std::size_t column = 0)
        : std::runtime_error(std::move(what)), row_(row), column_(column) {}
    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view token, double& out) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_index(std::string_view token, Index& out) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end && out >= 0;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    return out;
}

template <typename LineFn>
void for_each_line(std::string_view text, LineFn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            ++line_no;
            const std::string_view line = trim(text.substr(start, i - start));
            if (!line.empty()) fn(line_no, line);
            start = i + 1;
        }
    }
}

}  // namespace detail

/// Writes the data matrix as CSV, one sample per line, values in shortest
/// round-trip notation so reading the file back reproduces the exact doubles.
inline void write_data_csv(const std::string& path, const DataMatrix& data) {
    std::ofstream out = detail::open_for_write(path);
    const Eigen::MatrixXd& x = data.values();
    std::string line;
    for (Index r = 0; r < data.sample_count(); ++r) {
        line.clear();
        for (Index c = 0; c < data.variable_count(); ++c) {
            if (c > 0) line.push_back(',');
            line += detail::format_double(x(r, c));
        }
        line.push_back('\n');
        out << line;
    }
    if (!out) throw ParseError("failed writing: " + path);
}

/// Reads a numeric CSV into a data matrix. A first line whose cells do not
/// all parse as numbers is treated as a header and skipped; every other
/// malformed cell or ragged row is reported with its 1-based row and column.
inline DataMatrix read_data_csv(const std::string& path) {
    const std::string text = detail::read_file(path);
    std::vector<std::vector<double>> rows;
    std::size_t expected_cols = 0;
    bool first_content_line = true;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto cells = detail::split(line, ',');
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!detail::parse_double(cells[c], row[c])) {
                if (first_content_line) {
                    first_content_line = false;
                    row.clear();
                    return;  // header line, skip it
                }
                throw ParseError(path + ": cannot parse '" + std::string(cells[c]) +
                                     "' as a number at row " + std::to_string(line_no) +
                                     ", column " + std::to_string(c + 1),
                                 line_no, c + 1);
            }
        }
        first_content_line = false;
        if (expected_cols == 0) {
            expected_cols = row.size();
        } else if (row.size() != expected_cols) {
            throw ParseError(path + ": row " + std::to_string(line_no) + " has " +
                                 std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(expected_cols),
                             line_no, 0);
        }
        rows.push_back(std::move(row));
    });
    if (rows.empty()) throw ParseError(path + ": no data rows");
    Eigen::MatrixXd x(static_cast<Index>(rows.size()), static_cast<Index>(expected_cols));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < expected_cols; ++c)
            x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    try {
        return DataMatrix(std::move(x));
    } catch (const std::invalid_argument& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// FNV-1a 64-bit hash over the matrix values in row-major order, each double
/// contributing its 8 IEEE-754 bytes least significant first. Used to tie
/// result reports to their exact input.
inline std::uint64_t fingerprint(const DataMatrix& data) {
    std::uint64_t h = 14695981039346656037ULL;
    const Eigen::MatrixXd& x = data.values();
    for (Index r = 0; r < data.sample_count(); ++r) {
        for (Index c = 0; c < data.variable_count(); ++c) {
            const std::uint64_t bits = std::bit_cast<std::uint64_t>(x(r, c));
            for (int byte = 0; byte < 8; ++byte) {
                h ^= (bits >> (8 * byte)) & 0xffULL;
                h *= 1099511628211ULL;
            }
        }
    }
    return h;
}

/// Writes an undirected edge list, one "i j" line per edge with i < j,
/// ascending.
inline void write_edge_list(const std::string& path, const AdjacencyMatrix& graph) {
    std::ofstream out = detail::open_for_write(path);
    const Index n = graph.size();
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (graph.at(i, j)) out << i << ' ' << j << '\n';
    if (!out) throw ParseError("failed writing: " + path);
}

/// Writes a partially directed graph: "a > b" lines for directed edges, then
/// "a b" lines for undirected ones, each group ascending.
inline void write_mixed_graph(const std::string& path, const MixedGraph& g) {
    std::ofstream out = detail::open_for_write(path);
    for (const auto& [from, to] : g.directed) out << from << " > " << to << '\n';
    for (const auto& [a, b] : g.undirected) out << a << ' ' << b << '\n';
    if (!out) throw ParseError("failed writing: " + path);
}

/// Writes directed (cause, effect) pairs as "cause > effect" lines.
inline void write_directed_edges(const std::string& path,
                                 const std::vector<std::pair<Index, Index>>& edges) {
    std::ofstream out = detail::open_for_write(path);
    for (const auto& [from, to] : edges) out << from << " > " << to << '\n';
    if (!out) throw ParseError("failed writing: " + path);
}

/// Writes separating sets as "i j : k1 k2 ..." lines, pairs ascending,
/// members ascending; an empty set ends at the colon.
inline void write_sepsets(const std::string& path, const SeparationSets& sepsets) {
    std::ofstream out = detail::open_for_write(path);
    sepsets.for_each([&](Index i, Index j, const std::vector<Index>& set) {
        out << i << ' ' << j << " :";
        std::vector<Index> sorted(set);
        std::sort(sorted.begin(), sorted.end());
        for (Index s : sorted) out << ' ' << s;
        out << '\n';
    });
    if (!out) throw ParseError("failed writing: " + path);
}

struct EdgeListData {
    std::vector<std::pair<Index, Index>> undirected;
    std::vector<std::pair<Index, Index>> directed;
    Index max_vertex = -1;
};

/// Reads an edge list with "a b" (undirected) and "a > b" (directed) lines.
inline EdgeListData read_edge_list(const std::string& path) {
    const std::string text = detail::read_file(path);
    EdgeListData out;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto tokens = detail::split_whitespace(line);
        const auto bad = [&](const std::string& why) {
            return ParseError(path + ": " + why + " at line " + std::to_string(line_no),
                              line_no, 0);
        };
        Index a = 0;
        Index b = 0;
        bool is_directed = false;
        if (tokens.size() == 2) {
            if (!detail::parse_index(tokens[0], a) || !detail::parse_index(tokens[1], b))
                throw bad("expected two vertex ids");
        } else if (tokens.size() == 3 && tokens[1] == ">") {
            if (!detail::parse_index(tokens[0], a) || !detail::parse_index(tokens[2], b))
                throw bad("expected 'a > b'");
            is_directed = true;
        } else {
            throw bad("expected 'a b' or 'a > b'");
        }
        if (a == b) throw bad("self edge");
        out.max_vertex = std::max({out.max_vertex, a, b});
        if (is_directed) {
            out.directed.push_back({a, b});
        } else {
            out.undirected.push_back({std::min(a, b), std::max(a, b)});
        }
    });
    return out;
}

struct SepsetRecord {
    Index i = 0;
    Index j = 0;
    std::vector<Index> set;
};

/// Reads "i j : k1 k2 ..." separating-set lines.
inline std::vector<SepsetRecord> read_sepsets(const std::string& path) {
    const std::string text = detail::read_file(path);
    std::vector<SepsetRecord> out;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto tokens = detail::split_whitespace(line);
        const auto bad = [&](const std::string& why) {
            return ParseError(path + ": " + why + " at line " + std::to_string(line_no),
                              line_no, 0);
        };
        if (tokens.size() < 3 || tokens[2] != ":")
            throw bad("expected 'i j : members...'");
        SepsetRecord rec;
        if (!detail::parse_index(tokens[0], rec.i) || !detail::parse_index(tokens[1], rec.j))
            throw bad("expected two vertex ids before ':'");
        if (rec.i == rec.j) throw bad("self pair");
        for (std::size_t t = 3; t < tokens.size(); ++t) {
            Index member = 0;
            if (!detail::parse_index(tokens[t], member)) throw bad("bad set member");
            rec.set.push_back(member);
        }
        out.push_back(std::move(rec));
    });
    return out;
}

}  // namespace pcstable::io
