#include "blockdetail/common/error.h"

#include <utility>

namespace blockdetail {

ValidationError::ValidationError(const std::string& message, std::string field)
    : Error(message), field_(std::move(field)) {}

ParseError::ParseError(const std::string& message, std::size_t byte_offset)
    : Error(message + " (at byte offset " + std::to_string(byte_offset) + ")"),
      byte_offset_(byte_offset) {}

}  // namespace blockdetail
