#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace segraph::csv {

// Splits one RFC 4180 line: fields may be double-quoted, with "" escaping a
// quote. Returns false on an unterminated quote.
bool split_line(std::string_view line, std::vector<std::string>& fields);

// Quotes the field when it contains a separator, quote or line break; line
// breaks are replaced by spaces so that every record stays on one line.
std::string escape(std::string_view field);

}  // namespace segraph::csv
