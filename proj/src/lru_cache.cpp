#include "staggercast/lru_cache.hpp"

#include "staggercast/errors.hpp"

#include <algorithm>

namespace staggercast {

bool LruCache::lookup(const std::string& content_id) {
    auto it = index_.find(content_id);
    if (it == index_.end()) return false;
    order_.splice(order_.begin(), order_, it->second);
    return true;
}

std::optional<std::uint64_t> LruCache::size_of(const std::string& content_id) const {
    auto it = index_.find(content_id);
    if (it == index_.end()) return std::nullopt;
    return it->second->size;
}

std::vector<std::string> LruCache::insert(const std::string& content_id, std::uint64_t size_bytes) {
    if (size_bytes > capacity_) {
        throw PreconditionError("object '" + content_id + "' (" + std::to_string(size_bytes) +
                                " B) exceeds cache capacity " + std::to_string(capacity_));
    }
    if (auto it = index_.find(content_id); it != index_.end()) {
        used_ -= it->second->size;
        order_.erase(it->second);
        index_.erase(it);
    }
    std::vector<std::string> evicted;
    while (used_ + size_bytes > capacity_) {
        const Entry& victim = order_.back();
        used_ -= victim.size;
        evicted.push_back(victim.id);
        index_.erase(victim.id);
        order_.pop_back();
    }
    order_.push_front({content_id, size_bytes});
    index_[content_id] = order_.begin();
    used_ += size_bytes;
    return evicted;
}

std::vector<std::string> LruCache::contents_mru(std::size_t limit) const {
    std::vector<std::string> out;
    out.reserve(std::min(limit, order_.size()));
    for (const auto& e : order_) {
        if (out.size() >= limit) break;
        out.push_back(e.id);
    }
    return out;
}

}  // namespace staggercast
