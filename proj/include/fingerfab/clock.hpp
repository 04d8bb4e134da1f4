#pragma once

#include <chrono>
#include <mutex>

namespace fingerfab {

/// Time source in seconds. Every component that waits or timestamps goes
/// through a Clock so tests can run on virtual time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  virtual void sleep_until(double t) = 0;
  void sleep_for(double seconds) { sleep_until(now() + seconds); }
};

/// Manually driven time. Sleeping advances the clock instantly; time never
/// runs backwards. Thread-safe.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(double start = 0.0) : now_(start) {}

  double now() const override;
  void sleep_until(double t) override;
  void advance(double seconds);

 private:
  mutable std::mutex mu_;
  double now_;
};

/// Wall-clock seconds since construction.
class SteadyClock final : public Clock {
 public:
  SteadyClock() : epoch_(std::chrono::steady_clock::now()) {}

  double now() const override;
  void sleep_until(double t) override;

 private:
  std::chrono::steady_clock::time_point epoch_;
};

}  // namespace fingerfab
