#include "mrsnn/coverage.hpp"

#include <mutex>

namespace mrsnn::coverage {

namespace {
std::mutex mu;
std::set<std::string>& ops() {
  static std::set<std::string> s;
  return s;
}
}  // namespace

void mark(const char* op) {
  std::lock_guard lock(mu);
  auto& s = ops();
  if (s.find(op) == s.end()) s.emplace(op);
}

std::set<std::string> touched() {
  std::lock_guard lock(mu);
  return ops();
}

void reset() {
  std::lock_guard lock(mu);
  ops().clear();
}

}  // namespace mrsnn::coverage
