#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <new>
#include <type_traits>
#include <utility>
#include <vector>

namespace oldroyd {

// Allocates through fftw_malloc so every buffer shares FFTW's SIMD alignment and
// can be passed to the new-array execute functions.
template <class T>
struct FftwAllocator {
  using value_type = T;

  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n == 0) return nullptr;
    void* p = fftw_malloc(n * sizeof(T));
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  // Sized construction leaves trivial elements uninitialized; every transform overwrites
  // its output anyway. Ask for a value (vector(n, 0.0)) when zeros are needed.
  template <class U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }

  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept {
    return true;
  }
};

template <class T>
using AlignedVector = std::vector<T, FftwAllocator<T>>;

using Complex = std::complex<double>;
using RealBuffer = AlignedVector<double>;
using ComplexBuffer = AlignedVector<Complex>;

}  // namespace oldroyd
