// Internal CSV helpers.  The toolkit's CSV dialect is plain: comma
// separator, dot decimal point, no quoting, UTF-8, optional CRLF.

#pragma once

#include <string>
#include <vector>

namespace cough::csv {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace cough::csv
