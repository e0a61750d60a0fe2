#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nhint::csv {

/// 17 significant digits, scientific notation, '.' decimal separator.
std::string format_number(double x);

/// Comma-separated rows with LF line endings.
class Writer
{
public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);
  void row(const std::vector<std::string>& fields);

private:
  std::ostream& out_;
};

} // namespace nhint::csv
