#pragma once

#include <cstdint>
#include <cstddef>
#include <list>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace staggercast {

enum class CacheTier : std::uint8_t { Edge, Home };

/// Byte-capacity LRU cache of content ids. The sum of stored sizes never
/// exceeds the capacity.
class LruCache {
public:
    explicit LruCache(std::uint64_t capacity_bytes, CacheTier tier = CacheTier::Edge)
        : capacity_(capacity_bytes), tier_(tier) {}

    /// Hit refreshes recency. Miss leaves the cache untouched.
    bool lookup(const std::string& content_id);
    /// Presence test without touching recency.
    bool contains(const std::string& content_id) const { return index_.contains(content_id); }
    std::optional<std::uint64_t> size_of(const std::string& content_id) const;

    /// Inserts (or refreshes) an item, evicting least-recently-used items until
    /// it fits. Throws PreconditionError when size exceeds the whole capacity.
    /// Returns the evicted ids, oldest first.
    std::vector<std::string> insert(const std::string& content_id, std::uint64_t size_bytes);
    bool fits(std::uint64_t size_bytes) const { return size_bytes <= capacity_; }

    std::uint64_t capacity() const { return capacity_; }
    std::uint64_t used_bytes() const { return used_; }
    std::size_t item_count() const { return order_.size(); }
    CacheTier tier() const { return tier_; }

    /// Ids from most to least recently used, at most `limit` of them.
    std::vector<std::string> contents_mru(std::size_t limit = SIZE_MAX) const;

private:
    struct Entry {
        std::string id;
        std::uint64_t size;
    };
    std::uint64_t capacity_;
    CacheTier tier_;
    std::uint64_t used_ = 0;
    std::list<Entry> order_;  // front = most recent
    std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

}  // namespace staggercast
