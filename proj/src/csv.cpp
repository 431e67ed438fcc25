#include "bsde/csv.hpp"

#include "bsde/errors.hpp"

#include <fmt/format.h>

#include <sstream>

namespace bsde {

std::string format_number(double x) { return fmt::format("{:.17g}", x); }

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc)
{
    if (!out_) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    for (const auto& h : header) {
        cell(std::string_view(h));
    }
    end_row();
}

void CsvWriter::sep()
{
    if (!first_) {
        line_.push_back(',');
    }
    first_ = false;
}

CsvWriter& CsvWriter::cell(double x)
{
    sep();
    line_ += format_number(x);
    return *this;
}

CsvWriter& CsvWriter::cell(long long x)
{
    sep();
    line_ += std::to_string(x);
    return *this;
}

CsvWriter& CsvWriter::cell(std::string_view s)
{
    sep();
    line_.append(s);
    return *this;
}

CsvWriter& CsvWriter::empty()
{
    sep();
    return *this;
}

void CsvWriter::end_row()
{
    line_.push_back('\n');
    out_ << line_;
    line_.clear();
    first_ = true;
    if (!out_) {
        throw Error("write failed");
    }
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (line.back() == ',') {
            fields.emplace_back();
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace bsde
