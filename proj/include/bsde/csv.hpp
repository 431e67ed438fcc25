#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace bsde {

/// 17 significant digits, so that equal doubles render to equal bytes.
[[nodiscard]] std::string format_number(double x);

/// Minimal CSV writer. Rows are assembled with cell()/end_row(); the file is
/// opened eagerly and errors surface as bsde::Error.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(double x);
    CsvWriter& cell(long long x);
    CsvWriter& cell(std::size_t x) { return cell(static_cast<long long>(x)); }
    CsvWriter& cell(int x) { return cell(static_cast<long long>(x)); }
    CsvWriter& cell(std::string_view s);
    CsvWriter& cell(const char* s) { return cell(std::string_view(s)); }
    CsvWriter& empty();
    void end_row();

private:
    void sep();

    std::ofstream out_;
    std::string line_;
    bool first_ = true;
};

/// Splits a CSV file into rows of fields; no quoting support (none is emitted).
[[nodiscard]] std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace bsde
