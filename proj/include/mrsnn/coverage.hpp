#pragma once

// Records which library operations a run has exercised. The pipeline
// integration test uses it to check that the CLI steps reach every module.

#include <set>
#include <string>

namespace mrsnn::coverage {

void mark(const char* op);
std::set<std::string> touched();
void reset();

}  // namespace mrsnn::coverage
