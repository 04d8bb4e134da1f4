#include <fingerfab/clock.hpp>

#include <stdexcept>
#include <thread>

namespace fingerfab {

double VirtualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_until(double t) {
  std::lock_guard lock(mu_);
  if (t > now_) now_ = t;
}

void VirtualClock::advance(double seconds) {
  if (seconds < 0.0) throw std::invalid_argument("cannot advance a clock backwards");
  std::lock_guard lock(mu_);
  now_ += seconds;
}

double SteadyClock::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void SteadyClock::sleep_until(double t) {
  const double dt = t - now();
  if (dt > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
}

}  // namespace fingerfab
