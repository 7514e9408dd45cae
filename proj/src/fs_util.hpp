#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace sakugaflow::detail {

/// Write to a temporary sibling, optionally fdatasync, then rename over `target`.
void write_file_atomically(const std::filesystem::path& target, std::string_view bytes, bool sync);

std::optional<std::string> read_whole(const std::filesystem::path& p);

}  // namespace sakugaflow::detail
