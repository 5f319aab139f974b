#include "msrag/prompts.hpp"

#include <map>
#include <stdexcept>

namespace msrag::prompts {

namespace detail {
const std::map<std::string, std::string>& embedded();
}

const std::string& get(std::string_view name) {
  const auto& table = detail::embedded();
  auto it = table.find(std::string(name));
  if (it == table.end()) throw std::out_of_range("unknown prompt template: " + std::string(name));
  return it->second;
}

}  // namespace msrag::prompts
