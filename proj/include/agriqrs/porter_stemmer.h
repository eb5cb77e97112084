#pragma once

#include <string>
#include <string_view>

namespace agriqrs::text {

// Porter (1980) suffix-stripping stemmer, in the form of Martin Porter's
// reference C implementation. Expects a lowercase word; words containing
// anything other than a-z, or of length <= 2, are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace agriqrs::text
