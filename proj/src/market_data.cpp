#include "madl/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

namespace madl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        // Trim whitespace and a possible UTF-8 BOM / CR.
        while (!field.empty() &&
               (std::isspace(static_cast<unsigned char>(field.front())) ||
                static_cast<unsigned char>(field.front()) > 0x7f)) {
            field.erase(field.begin());
        }
        while (!field.empty() &&
               std::isspace(static_cast<unsigned char>(field.back()))) {
            field.pop_back();
        }
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

bool valid_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

PriceSeries load_csv(const std::string& path, const CsvSchema& schema,
                     const std::string& symbol, AssetClass asset_class) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open file");

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    const auto header = split_csv_line(line);
    std::ptrdiff_t date_col = -1, close_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (lower(header[i]) == lower(schema.date_column)) date_col = static_cast<std::ptrdiff_t>(i);
        if (lower(header[i]) == lower(schema.close_column)) close_col = static_cast<std::ptrdiff_t>(i);
    }
    if (date_col < 0) {
        throw DataError(path + ": missing column '" + schema.date_column + "'");
    }
    if (close_col < 0) {
        throw DataError(path + ": missing column '" + schema.close_column + "'");
    }

    std::vector<std::pair<std::string, double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const auto need = static_cast<std::size_t>(std::max(date_col, close_col)) + 1;
        if (fields.size() < need) {
            throw DataError(path + ":" + std::to_string(line_no) + ": too few columns");
        }
        const std::string& date = fields[static_cast<std::size_t>(date_col)];
        if (!valid_iso_date(date)) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": bad date '" + date + "' (expected YYYY-MM-DD)");
        }
        const std::string& close_str = fields[static_cast<std::size_t>(close_col)];
        double close = 0.0;
        const auto [p, ec] =
            std::from_chars(close_str.data(), close_str.data() + close_str.size(), close);
        if (ec != std::errc() || p != close_str.data() + close_str.size()) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": unparsable close '" + close_str + "'");
        }
        if (close <= 0.0) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": non-positive close " + close_str);
        }
        rows.emplace_back(date, close);
    }
    if (rows.empty()) throw DataError(path + ": no data rows");

    // ISO-8601 sorts lexicographically; stable sort keeps file order for
    // equal dates so the duplicate check names the first offender.
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].first == rows[i - 1].first) {
            throw DataError(path + ": duplicate date " + rows[i].first);
        }
    }

    PriceSeries series;
    series.symbol = symbol;
    series.asset_class = asset_class;
    series.dates.reserve(rows.size());
    series.closes.reserve(rows.size());
    for (auto& [date, close] : rows) {
        series.dates.push_back(std::move(date));
        series.closes.push_back(close);
    }
    return series;
}

ReturnSeries to_returns(const PriceSeries& prices) {
    if (prices.size() < 2) throw UsageError("to_returns: need at least 2 prices");
    ReturnSeries r;
    r.dates.reserve(prices.size() - 1);
    r.returns.reserve(prices.size() - 1);
    for (std::size_t i = 1; i < prices.size(); ++i) {
        r.dates.push_back(prices.dates[i]);
        r.returns.push_back(prices.closes[i] / prices.closes[i - 1] - 1.0);
    }
    return r;
}

}  // namespace madl
