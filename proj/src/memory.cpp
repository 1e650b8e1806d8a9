// Allocation accounting. The library links with --wrap for the malloc family,
// so every allocation made from its code (including Eigen's) passes through
// the hooks below; global operator new/delete are routed the same way.

#include "kgalign/memory.hpp"

#include <malloc.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <new>

namespace kgalign::memory {
namespace {

std::atomic<std::int64_t> g_current{0};
std::atomic<std::int64_t> g_peak{0};

// Requested sizes are counted, not malloc_usable_size: the latter depends on
// heap layout and made identical runs report different peaks.
void on_alloc(std::size_t bytes) {
  const auto now = g_current.fetch_add(static_cast<std::int64_t>(bytes)) + static_cast<std::int64_t>(bytes);
  auto peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

void on_free(std::size_t bytes) { g_current.fetch_sub(static_cast<std::int64_t>(bytes)); }

}  // namespace

std::int64_t current_bytes() { return g_current.load(); }
std::int64_t peak_bytes() { return g_peak.load(); }
void reset_peak() { g_peak.store(g_current.load()); }

}  // namespace kgalign::memory

// Every tracked block carries 32 bytes in front of the user pointer:
// [size][base][magic]. Only the magic word (8 bytes before the pointer, the
// allocator's own size field for foreign blocks) is read before the block is
// known to be ours, so blocks from untracked code can still be released here.
namespace {

constexpr std::size_t kHeader = 32;
constexpr std::uint64_t kMagic = 0x6b67616c69676e31ULL;

struct Header {
  std::size_t size;
  void* base;
  std::uint64_t magic;
};

Header* header_of(void* user) { return reinterpret_cast<Header*>(static_cast<char*>(user) - sizeof(Header)); }

bool tracked(void* user) {
  std::uint64_t magic;
  std::memcpy(&magic, static_cast<char*>(user) - 8, 8);
  return magic == kMagic;
}

void* place(void* base, std::size_t size, std::size_t align) {
  if (!base) return nullptr;
  auto addr = reinterpret_cast<std::uintptr_t>(base) + kHeader;
  addr = (addr + align - 1) / align * align;
  void* user = reinterpret_cast<void*>(addr);
  *header_of(user) = {size, base, kMagic};
  kgalign::memory::on_alloc(size);
  return user;
}

}  // namespace

extern "C" {
void* __real_malloc(std::size_t size);
void __real_free(void* p);

void* __wrap_malloc(std::size_t size) {
  if (size > SIZE_MAX - kHeader) return nullptr;
  return place(__real_malloc(size + kHeader), size, 16);
}

void __wrap_free(void* p) {
  if (!p) return;
  if (!tracked(p)) {
    __real_free(p);
    return;
  }
  Header* h = header_of(p);
  kgalign::memory::on_free(h->size);
  h->magic = 0;
  __real_free(h->base);
}

void* __wrap_calloc(std::size_t n, std::size_t size) {
  if (size != 0 && n > SIZE_MAX / size) return nullptr;
  void* p = __wrap_malloc(n * size);
  if (p) std::memset(p, 0, n * size);
  return p;
}

void* __wrap_realloc(void* p, std::size_t size) {
  if (!p) return __wrap_malloc(size);
  if (size == 0) {
    __wrap_free(p);
    return nullptr;
  }
  void* q = __wrap_malloc(size);
  if (!q) return nullptr;
  const std::size_t old = tracked(p) ? header_of(p)->size : malloc_usable_size(p);
  std::memcpy(q, p, std::min(old, size));
  __wrap_free(p);
  return q;
}
}

namespace {

void* tracked_new(std::size_t size) {
  void* p = std::malloc(size == 0 ? 1 : size);
  if (!p) throw std::bad_alloc();
  return p;
}

void* tracked_new_aligned(std::size_t size, std::align_val_t align) {
  const auto a = std::max<std::size_t>(static_cast<std::size_t>(align), 16);
  if (size == 0) size = 1;
  if (size > SIZE_MAX - kHeader - a) throw std::bad_alloc();
  void* p = place(__real_malloc(size + kHeader + a), size, a);
  if (!p) throw std::bad_alloc();
  return p;
}

}  // namespace

void* operator new(std::size_t size) { return tracked_new(size); }
void* operator new[](std::size_t size) { return tracked_new(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept { return std::malloc(size == 0 ? 1 : size); }
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept { return std::malloc(size == 0 ? 1 : size); }
void* operator new(std::size_t size, std::align_val_t a) { return tracked_new_aligned(size, a); }
void* operator new[](std::size_t size, std::align_val_t a) { return tracked_new_aligned(size, a); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
void operator delete(void* p, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void* p, std::align_val_t) noexcept { std::free(p); }
void operator delete(void* p, std::size_t, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t, std::align_val_t) noexcept { std::free(p); }
