#pragma once

#include <string>
#include <vector>

namespace afs {

/// Fixed 6-decimal cell formatting used by every CSV the tools emit.
std::string fmt6(double v);

/// CSV document with a mandatory header row.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> cells);
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// write-temp-then-rename; partial files are never observable.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace afs
