#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace saedet::cli {

// Runs one `saedet` invocation. args excludes the program name. Returns the
// process exit code: 0 on success, 1 on a library error, 2 on a usage error.
// Errors go to `err` as "error[E_CODE]: message".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// <dir>/<doc_id>.L<layer>.saet. DataError for ids that are not safe file names.
std::filesystem::path activation_path(const std::filesystem::path& dir, const std::string& doc_id, int layer);

}  // namespace saedet::cli
