#include "vortexlab/util.hpp"

#include <cstdlib>
#include <cstring>

namespace vortexlab {

static LogLevel parse_level() {
  const char* v = std::getenv("VORTEXLAB_LOG");
  if (!v) return LogLevel::Warn;
  if (std::strcmp(v, "error") == 0) return LogLevel::Error;
  if (std::strcmp(v, "warn") == 0) return LogLevel::Warn;
  if (std::strcmp(v, "info") == 0) return LogLevel::Info;
  if (std::strcmp(v, "debug") == 0) return LogLevel::Debug;
  return LogLevel::Warn;
}

LogLevel log_level() {
  static LogLevel lvl = parse_level();
  return lvl;
}

void log_msg(LogLevel lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[vortexlab:%s] %s\n", names[static_cast<int>(lvl)],
               msg.c_str());
}

std::string hex16(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header,
                     const std::string& comment)
    : ncols_(header.size()), path_(path) {
  f_ = std::fopen(path.c_str(), "w");
  if (!f_) throw InputError("cannot open for writing: " + path);
  if (!comment.empty()) std::fprintf(f_, "# %s\n", comment.c_str());
  for (std::size_t i = 0; i < header.size(); ++i)
    std::fprintf(f_, "%s%s", header[i].c_str(),
                 i + 1 < header.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != ncols_)
    throw InputError("csv row width mismatch in " + path_);
  for (std::size_t i = 0; i < values.size(); ++i)
    std::fprintf(f_, "%s%s", fmt_g17(values[i]).c_str(),
                 i + 1 < values.size() ? "," : "\n");
}

void CsvWriter::row_mixed(const std::vector<std::string>& cells) {
  if (cells.size() != ncols_)
    throw InputError("csv row width mismatch in " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i)
    std::fprintf(f_, "%s%s", cells[i].c_str(),
                 i + 1 < cells.size() ? "," : "\n");
}

void CsvWriter::close() {
  if (f_) {
    std::fclose(f_);
    f_ = nullptr;
  }
}

}  // namespace vortexlab
