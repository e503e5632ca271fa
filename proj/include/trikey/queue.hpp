#pragma once

#include <cassert>
#include <cstddef>
#include <iterator>
#include <memory>
#include <type_traits>
#include <utility>
#include <vector>

namespace trikey {

/// Singly linked FIFO with start/end pointers. Supports append at the end,
/// removal at the start and forward iteration. Nodes are recycled through a
/// free list.
template <typename T>
class OccurrenceQueue {
    struct Node {
        T value;
        Node* next = nullptr;
    };

public:
    template <bool Const>
    class Iter {
        using NodePtr = std::conditional_t<Const, const Node*, Node*>;

    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = T;
        using difference_type = std::ptrdiff_t;
        using pointer = std::conditional_t<Const, const T*, T*>;
        using reference = std::conditional_t<Const, const T&, T&>;

        Iter() = default;
        explicit Iter(NodePtr n) noexcept : node_(n) {}
        reference operator*() const noexcept { return node_->value; }
        pointer operator->() const noexcept { return &node_->value; }
        Iter& operator++() noexcept {
            node_ = node_->next;
            return *this;
        }
        Iter operator++(int) noexcept {
            auto copy = *this;
            node_ = node_->next;
            return copy;
        }
        friend bool operator==(const Iter&, const Iter&) = default;

    private:
        NodePtr node_ = nullptr;
    };

    using iterator = Iter<false>;
    using const_iterator = Iter<true>;

    OccurrenceQueue() = default;
    OccurrenceQueue(const OccurrenceQueue&) = delete;
    OccurrenceQueue& operator=(const OccurrenceQueue&) = delete;
    OccurrenceQueue(OccurrenceQueue&& other) noexcept
        : start_(std::exchange(other.start_, nullptr)),
          end_(std::exchange(other.end_, nullptr)),
          free_(std::exchange(other.free_, nullptr)),
          size_(std::exchange(other.size_, 0)),
          chunks_(std::move(other.chunks_)) {}
    OccurrenceQueue& operator=(OccurrenceQueue&& other) noexcept {
        if (this != &other) {
            start_ = std::exchange(other.start_, nullptr);
            end_ = std::exchange(other.end_, nullptr);
            free_ = std::exchange(other.free_, nullptr);
            size_ = std::exchange(other.size_, 0);
            chunks_ = std::move(other.chunks_);
        }
        return *this;
    }

    [[nodiscard]] bool empty() const noexcept { return start_ == nullptr; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }

    T& front() noexcept {
        assert(start_);
        return start_->value;
    }
    const T& front() const noexcept {
        assert(start_);
        return start_->value;
    }
    T& back() noexcept {
        assert(end_);
        return end_->value;
    }
    const T& back() const noexcept {
        assert(end_);
        return end_->value;
    }

    void push_back(const T& value) {
        Node* n = acquire();
        n->value = value;
        n->next = nullptr;
        if (end_)
            end_->next = n;
        else
            start_ = n;
        end_ = n;
        ++size_;
    }

    void pop_front() noexcept {
        assert(start_);
        Node* n = start_;
        start_ = n->next;
        if (!start_) end_ = nullptr;
        n->next = free_;
        free_ = n;
        --size_;
    }

    void clear() noexcept {
        while (start_) pop_front();
    }

    iterator begin() noexcept { return iterator(start_); }
    iterator end() noexcept { return iterator(nullptr); }
    const_iterator begin() const noexcept { return const_iterator(start_); }
    const_iterator end() const noexcept { return const_iterator(nullptr); }

private:
    Node* acquire() {
        if (!free_) {
            constexpr std::size_t chunk = 256;
            chunks_.push_back(std::make_unique<Node[]>(chunk));
            auto* block = chunks_.back().get();
            for (std::size_t i = 0; i < chunk; ++i) {
                block[i].next = free_;
                free_ = &block[i];
            }
        }
        Node* n = free_;
        free_ = n->next;
        return n;
    }

    Node* start_ = nullptr;
    Node* end_ = nullptr;
    Node* free_ = nullptr;
    std::size_t size_ = 0;
    std::vector<std::unique_ptr<Node[]>> chunks_;
};

}  // namespace trikey
