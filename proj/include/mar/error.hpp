#ifndef MAR_ERROR_HPP
#define MAR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mar {

// Root of everything the library throws on bad input or numerical trouble.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class invalid_argument : public error {
 public:
  using error::error;
};

// A row (component) whose norm is too small to define a direction.
class degenerate_row : public error {
 public:
  using error::error;
};

// Rows that are linearly dependent where independence is required.
class dependent_rows : public error {
 public:
  using error::error;
};

class numerical_failure : public error {
 public:
  using error::error;
};

// Exact enumeration requested on an instance that is too large.
class capacity_error : public error {
 public:
  using error::error;
};

class parse_error : public error {
 public:
  parse_error(const std::string& what, std::size_t line)
      : error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mar

#endif  // MAR_ERROR_HPP
