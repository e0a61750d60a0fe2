#include "nhint/csv.hpp"

#include <cstdio>

namespace nhint::csv {

std::string format_number(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

void Writer::header(const std::vector<std::string>& names)
{
  row(names);
}

void Writer::row(const std::vector<std::string>& fields)
{
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) {
      out_ << ',';
    }
    out_ << fields[i];
  }
  out_ << '\n';
}

} // namespace nhint::csv
