#pragma once

#include <chrono>
#include <sstream>
#include <string>
#include <vector>

namespace napa::acceptance {

// Collects failed sub-checks of one criterion plus a measured-value summary.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  template <class T>
  void note(const std::string& key, const T& value) {
    std::ostringstream s;
    s << key << '=' << value;
    notes_.push_back(s.str());
  }
  bool passed() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void bonemap_geometry(Report& r);
void loop_parameterization(Report& r);
void soft_renderer(Report& r);
void loss_suite(Report& r);
void metrics(Report& r);
void training_protocol(Report& r);
void instance_norm(Report& r);
void service(Report& r);

}  // namespace napa::acceptance
