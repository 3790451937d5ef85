#include "diagno/errors.hpp"

namespace diagno {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

} // namespace diagno
