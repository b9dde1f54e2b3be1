#include "mvlatent/rng.hpp"

#include <cmath>

#include "mvlatent/errors.hpp"

namespace mvlatent::nn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double Rng::normal() {
  double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// One canonical normal stream: fill_normal(n) consumes exactly the same
// draws as n calls to normal(), so bulk and scalar callers stay aligned.
void Rng::fill_normal(double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = normal();
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidArgument("rng: index(0)");
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t salt) {
  std::uint64_t h = fnv1a64(stream.data(), stream.size());
  return splitmix64(master ^ splitmix64(h ^ splitmix64(salt)));
}

std::uint64_t fnv1a64(const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mvlatent::nn
