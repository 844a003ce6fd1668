#include "divkit/jsonl.hpp"

#include "divkit/error.hpp"

namespace divkit {

namespace {

nlohmann::json parse_header(const std::string& line, const std::filesystem::path& path) {
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        fail(ErrorCode::SchemaViolation, path.string() + ":1: header is not a JSON object");
    }
    if (!h.is_object() || !h.contains("schema_version") || !h.contains("kind") ||
        !h["kind"].is_string()) {
        fail(ErrorCode::SchemaViolation,
             path.string() + ":1: header needs schema_version and kind");
    }
    const auto& v = h["schema_version"];
    if (!v.is_number_integer()) {
        fail(ErrorCode::SchemaViolation, path.string() + ":1: schema_version must be an integer");
    }
    if (v.get<int>() != kSchemaVersion) {
        fail(ErrorCode::UnsupportedVersion,
             path.string() + ": schema_version " + v.dump() + " (supported: 1)");
    }
    return h;
}

}  // namespace

JsonlReader::JsonlReader(const std::filesystem::path& path, std::string_view expected_kind)
    : path_(path), in_(path, std::ios::binary) {
    if (!in_) fail(ErrorCode::MissingFile, path.string());
    std::string line;
    if (!std::getline(in_, line)) {
        fail(ErrorCode::SchemaViolation, path.string() + ": missing header line");
    }
    line_no_ = 1;
    header_ = parse_header(line, path);
    const auto kind = header_["kind"].get<std::string>();
    if (!expected_kind.empty() && kind != expected_kind) {
        fail(ErrorCode::SchemaViolation, path.string() + ": expected kind '" +
                                             std::string(expected_kind) + "', found '" + kind +
                                             "'");
    }
}

bool JsonlReader::next_line(std::string& line) {
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        return true;
    }
    if (in_.bad()) fail(ErrorCode::IoFailure, path_.string() + ": read error");
    return false;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, std::string_view kind,
                         const nlohmann::ordered_json& extra_header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) fail(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
    nlohmann::ordered_json h;
    h["schema_version"] = kSchemaVersion;
    h["kind"] = std::string(kind);
    for (const auto& [k, v] : extra_header.items()) h[k] = v;
    out_ << h.dump() << '\n';
}

void JsonlWriter::write(const nlohmann::ordered_json& obj) {
    out_ << obj.dump() << '\n';
    if (!out_) fail(ErrorCode::IoFailure, "write failed: " + path_.string());
}

void JsonlWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.flush();
    out_.close();
    if (out_.fail()) fail(ErrorCode::IoFailure, "close failed: " + path_.string());
}

JsonlWriter::~JsonlWriter() {
    if (!closed_) {
        out_.flush();
        out_.close();
    }
}

nlohmann::json peek_header(const std::filesystem::path& path) {
    JsonlReader r(path, "");
    return r.header();
}

}  // namespace divkit
