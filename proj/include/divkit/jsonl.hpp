#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <json.hpp>

namespace divkit {

inline constexpr int kSchemaVersion = 1;

/// Line-delimited JSON file whose first line is
/// `{"schema_version": 1, "kind": "<kind>", ...}`. Extra header fields are
/// kept in header() for self-describing files such as decile maps.
class JsonlReader {
public:
    JsonlReader(const std::filesystem::path& path, std::string_view expected_kind);

    /// Reads the next non-blank line. Returns false at end of file.
    /// The raw text is kept so lenient readers can report it.
    bool next_line(std::string& line);

    /// 1-based physical line number of the last line returned.
    std::size_t line_number() const { return line_no_; }
    const nlohmann::json& header() const { return header_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    nlohmann::json header_;
    std::size_t line_no_ = 0;
};

class JsonlWriter {
public:
    JsonlWriter(const std::filesystem::path& path, std::string_view kind,
                const nlohmann::ordered_json& extra_header = nlohmann::ordered_json::object());

    void write(const nlohmann::ordered_json& obj);
    void close();
    ~JsonlWriter();

    JsonlWriter(const JsonlWriter&) = delete;
    JsonlWriter& operator=(const JsonlWriter&) = delete;

private:
    std::filesystem::path path_;
    std::ofstream out_;
    bool closed_ = false;
};

/// Reads the header line only; used to dispatch on `kind`.
nlohmann::json peek_header(const std::filesystem::path& path);

}  // namespace divkit
