#include <amt/distrib/parcel.hpp>
#include <amt/distrib/transport.hpp>
#include <amt/errors.hpp>

#include <atomic>
#include <cassert>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <utility>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

namespace amt::distrib {

parcelport_kind parse_parcelport(std::string_view name)
{
    if (name == "tcp")
        return parcelport_kind::tcp;
    if (name == "loopback")
        return parcelport_kind::loopback;
    throw configuration_error("unknown parcelport '" + std::string(name) +
        "' (expected tcp or loopback)");
}

std::string_view to_string(parcelport_kind kind) noexcept
{
    return kind == parcelport_kind::tcp ? "tcp" : "loopback";
}

endpoint endpoint::parse(std::string_view text)
{
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size())
        throw configuration_error("endpoint '" + std::string(text) + "' is not HOST:PORT");
    unsigned port = 0;
    auto digits = text.substr(colon + 1);
    auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || end != digits.data() + digits.size() || port > 65535)
        throw configuration_error("endpoint '" + std::string(text) + "' has a bad port");
    return endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::string endpoint::to_string() const
{
    return host + ":" + std::to_string(port);
}

namespace {

    // Shared receive-loop lifecycle for both transports.
    class connection_base : public connection
    {
      public:
        ~connection_base() override
        {
            if (rx_.joinable())
            {
                if (rx_.get_id() == std::this_thread::get_id())
                    rx_.detach();
                else
                    rx_.join();
            }
        }

        void start(frame_handler on_frame, close_handler on_close) override
        {
            rx_ = std::thread([this, on_frame = std::move(on_frame),
                                  on_close = std::move(on_close)] {
                std::string reason = receive_loop(on_frame);
                on_close(reason);
            });
        }

      protected:
        // Runs until the stream ends; returns the reason.
        virtual std::string receive_loop(frame_handler const& on_frame) = 0;

        void join_receiver()
        {
            if (rx_.joinable() && rx_.get_id() != std::this_thread::get_id())
                rx_.join();
        }

      private:
        std::thread rx_;
    };

    // ------------------------------------------------------------------
    // In-process loopback: two FIFO channels per connection.

    struct channel
    {
        std::mutex m;
        std::condition_variable cv;
        std::deque<std::pair<std::uint64_t, byte_buffer>> q;
        std::uint64_t next_seq = 0;
        bool closed = false;

        void close()
        {
            std::lock_guard lk(m);
            closed = true;
            cv.notify_all();
        }
    };

    class loopback_connection final : public connection_base
    {
      public:
        loopback_connection(std::shared_ptr<channel> in, std::shared_ptr<channel> out,
            std::size_t max_frame, std::string desc)
          : in_(std::move(in))
          , out_(std::move(out))
          , max_frame_(max_frame)
          , desc_(std::move(desc))
        {
        }

        ~loopback_connection() override
        {
            close();
        }

        void send(byte_view frame) override
        {
            std::lock_guard lk(out_->m);
            if (out_->closed)
                throw connection_error("loopback connection " + desc_ + " is closed");
            out_->q.emplace_back(out_->next_seq++, byte_buffer(frame.begin(), frame.end()));
            out_->cv.notify_one();
        }

        void close() override
        {
            in_->close();
            out_->close();
            join_receiver();
        }

        std::string describe() const override
        {
            return desc_;
        }

      private:
        std::string receive_loop(frame_handler const& on_frame) override
        {
            std::uint64_t expected = 0;
            for (;;)
            {
                std::pair<std::uint64_t, byte_buffer> item;
                {
                    std::unique_lock lk(in_->m);
                    in_->cv.wait(lk, [&] { return in_->closed || !in_->q.empty(); });
                    if (in_->q.empty())
                        return "closed";
                    item = std::move(in_->q.front());
                    in_->q.pop_front();
                }
                // In-order delivery per connection.
                assert(item.first == expected);
                ++expected;
                if (item.second.size() > max_frame_ + frame_prefix_size)
                {
                    in_->close();
                    out_->close();
                    return "oversized frame";
                }
                on_frame(std::move(item.second));
            }
        }

        std::shared_ptr<channel> in_, out_;
        std::size_t max_frame_;
        std::string desc_;
    };

    struct loopback_listen_state
    {
        std::mutex m;
        std::condition_variable cv;
        std::deque<std::shared_ptr<connection>> pending;
        bool closed = false;
    };

    struct loopback_registry
    {
        std::mutex m;
        std::map<std::string, std::shared_ptr<loopback_listen_state>> listeners;
        std::uint16_t next_port = 40000;

        static loopback_registry& get()
        {
            static loopback_registry r;
            return r;
        }
    };

    class loopback_listener final : public listener
    {
      public:
        loopback_listener(endpoint where, std::shared_ptr<loopback_listen_state> state)
          : where_(std::move(where))
          , state_(std::move(state))
        {
        }

        ~loopback_listener() override
        {
            close();
        }

        std::shared_ptr<connection> accept() override
        {
            std::unique_lock lk(state_->m);
            state_->cv.wait(lk, [&] { return state_->closed || !state_->pending.empty(); });
            if (state_->closed)
                return nullptr;
            auto c = std::move(state_->pending.front());
            state_->pending.pop_front();
            return c;
        }

        void close() override
        {
            {
                auto& reg = loopback_registry::get();
                std::lock_guard lk(reg.m);
                auto it = reg.listeners.find(where_.to_string());
                if (it != reg.listeners.end() && it->second == state_)
                    reg.listeners.erase(it);
            }
            std::deque<std::shared_ptr<connection>> orphans;
            {
                std::lock_guard lk(state_->m);
                state_->closed = true;
                orphans.swap(state_->pending);
                state_->cv.notify_all();
            }
            for (auto& c : orphans)
                c->close();
        }

        endpoint local_endpoint() const override
        {
            return where_;
        }

      private:
        endpoint where_;
        std::shared_ptr<loopback_listen_state> state_;
    };

    class loopback_port final : public parcelport
    {
      public:
        explicit loopback_port(std::size_t max_frame)
          : max_frame_(max_frame)
        {
        }

        std::unique_ptr<listener> listen(endpoint const& where) override
        {
            auto& reg = loopback_registry::get();
            std::lock_guard lk(reg.m);
            endpoint bound = where;
            if (bound.port == 0)
            {
                do
                    bound.port = reg.next_port++;
                while (reg.listeners.count(bound.to_string()) != 0);
            }
            auto key = bound.to_string();
            if (reg.listeners.count(key) != 0)
                throw bind_error("loopback endpoint " + key + " already in use");
            auto state = std::make_shared<loopback_listen_state>();
            reg.listeners.emplace(key, state);
            return std::make_unique<loopback_listener>(bound, state);
        }

        std::shared_ptr<connection> connect(endpoint const& where) override
        {
            auto& reg = loopback_registry::get();
            std::lock_guard lk(reg.m);
            auto key = where.to_string();
            auto it = reg.listeners.find(key);
            if (it == reg.listeners.end())
                throw connection_error("loopback endpoint " + key + " refused connection");
            auto a = std::make_shared<channel>();
            auto b = std::make_shared<channel>();
            auto server = std::make_shared<loopback_connection>(a, b, max_frame_, "loopback<-" + key);
            auto client = std::make_shared<loopback_connection>(b, a, max_frame_, "loopback->" + key);
            auto& st = *it->second;
            std::lock_guard lk2(st.m);
            if (st.closed)
                throw connection_error("loopback endpoint " + key + " refused connection");
            st.pending.push_back(server);
            st.cv.notify_one();
            return client;
        }

        parcelport_kind kind() const noexcept override
        {
            return parcelport_kind::loopback;
        }

      private:
        std::size_t max_frame_;
    };

    // ------------------------------------------------------------------
    // TCP.

    std::string errno_text(char const* what)
    {
        return std::string(what) + ": " + std::strerror(errno);
    }

    struct addrinfo_deleter
    {
        void operator()(addrinfo* p) const noexcept
        {
            ::freeaddrinfo(p);
        }
    };
    using addrinfo_ptr = std::unique_ptr<addrinfo, addrinfo_deleter>;

    addrinfo_ptr resolve(endpoint const& where, bool passive)
    {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        hints.ai_flags = passive ? AI_PASSIVE : 0;
        addrinfo* raw = nullptr;
        auto port = std::to_string(where.port);
        int rc = ::getaddrinfo(where.host.empty() ? nullptr : where.host.c_str(),
            port.c_str(), &hints, &raw);
        if (rc != 0)
            throw connection_error("cannot resolve " + where.to_string() + ": " + ::gai_strerror(rc));
        return addrinfo_ptr(raw);
    }

    void set_nodelay(int fd)
    {
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    class tcp_connection final : public connection_base
    {
      public:
        tcp_connection(int fd, std::size_t max_frame, std::string desc)
          : fd_(fd)
          , max_frame_(max_frame)
          , desc_(std::move(desc))
        {
            set_nodelay(fd_);
        }

        ~tcp_connection() override
        {
            close();
            ::close(fd_);
        }

        void send(byte_view frame) override
        {
            std::lock_guard lk(send_m_);
            if (closed_.load(std::memory_order_acquire))
                throw connection_error("tcp connection " + desc_ + " is closed");
            std::size_t off = 0;
            while (off < frame.size())
            {
                auto n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
                if (n < 0)
                {
                    if (errno == EINTR)
                        continue;
                    throw connection_error(errno_text(("send to " + desc_).c_str()));
                }
                off += static_cast<std::size_t>(n);
            }
        }

        void close() override
        {
            if (!closed_.exchange(true))
                ::shutdown(fd_, SHUT_RDWR);
            join_receiver();
        }

        std::string describe() const override
        {
            return desc_;
        }

      private:
        // false on EOF or error.
        bool read_exact(std::uint8_t* dst, std::size_t n)
        {
            std::size_t off = 0;
            while (off < n)
            {
                auto r = ::recv(fd_, dst + off, n - off, 0);
                if (r == 0)
                    return false;
                if (r < 0)
                {
                    if (errno == EINTR)
                        continue;
                    return false;
                }
                off += static_cast<std::size_t>(r);
            }
            return true;
        }

        std::string receive_loop(frame_handler const& on_frame) override
        {
            for (;;)
            {
                byte_buffer frame(frame_prefix_size);
                if (!read_exact(frame.data(), frame_prefix_size))
                    return "peer closed";
                std::uint32_t len = 0;
                for (std::size_t i = 0; i != 4; ++i)
                    len |= static_cast<std::uint32_t>(frame[i]) << (8 * i);
                if (len > max_frame_)
                {
                    closed_.store(true);
                    ::shutdown(fd_, SHUT_RDWR);
                    return "oversized frame (" + std::to_string(len) + " bytes)";
                }
                frame.resize(frame_prefix_size + len);
                if (!read_exact(frame.data() + frame_prefix_size, len))
                    return "peer closed mid-frame";
                on_frame(std::move(frame));
            }
        }

        int fd_;
        std::size_t max_frame_;
        std::string desc_;
        std::mutex send_m_;
        std::atomic<bool> closed_{false};
    };

    class tcp_listener final : public listener
    {
      public:
        tcp_listener(int fd, endpoint where, std::size_t max_frame)
          : fd_(fd)
          , where_(std::move(where))
          , max_frame_(max_frame)
        {
        }

        ~tcp_listener() override
        {
            close();
            ::close(fd_);
        }

        std::shared_ptr<connection> accept() override
        {
            for (;;)
            {
                if (closed_.load(std::memory_order_acquire))
                    return nullptr;
                int c = ::accept(fd_, nullptr, nullptr);
                if (c >= 0)
                {
                    if (closed_.load(std::memory_order_acquire))
                    {
                        ::close(c);
                        return nullptr;
                    }
                    return std::make_shared<tcp_connection>(
                        c, max_frame_, "tcp<-" + where_.to_string());
                }
                if (errno == EINTR || errno == ECONNABORTED)
                    continue;
                return nullptr;
            }
        }

        void close() override
        {
            if (!closed_.exchange(true))
                ::shutdown(fd_, SHUT_RDWR);
        }

        endpoint local_endpoint() const override
        {
            return where_;
        }

      private:
        int fd_;
        endpoint where_;
        std::size_t max_frame_;
        std::atomic<bool> closed_{false};
    };

    class tcp_port final : public parcelport
    {
      public:
        explicit tcp_port(std::size_t max_frame)
          : max_frame_(max_frame)
        {
        }

        std::unique_ptr<listener> listen(endpoint const& where) override
        {
            addrinfo_ptr res;
            try
            {
                res = resolve(where, true);
            }
            catch (connection_error const& e)
            {
                throw bind_error(e.what());
            }
            int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, 0);
            if (fd < 0)
                throw bind_error(errno_text("socket"));
            int one = 1;
            ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
            if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0)
            {
                auto msg = errno_text(("bind " + where.to_string()).c_str());
                ::close(fd);
                throw bind_error(msg);
            }
            if (::listen(fd, 64) != 0)
            {
                auto msg = errno_text(("listen " + where.to_string()).c_str());
                ::close(fd);
                throw bind_error(msg);
            }
            sockaddr_in addr{};
            socklen_t len = sizeof(addr);
            ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
            endpoint bound{where.host, ntohs(addr.sin_port)};
            return std::make_unique<tcp_listener>(fd, bound, max_frame_);
        }

        std::shared_ptr<connection> connect(endpoint const& where) override
        {
            auto res = resolve(where, false);
            int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, 0);
            if (fd < 0)
                throw connection_error(errno_text("socket"));
            if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0)
            {
                auto msg = errno_text(("connect " + where.to_string()).c_str());
                ::close(fd);
                throw connection_error(msg);
            }
            return std::make_shared<tcp_connection>(fd, max_frame_, "tcp->" + where.to_string());
        }

        parcelport_kind kind() const noexcept override
        {
            return parcelport_kind::tcp;
        }

      private:
        std::size_t max_frame_;
    };

}    // namespace

std::uint16_t find_free_tcp_port(std::string const& host)
{
    tcp_port probe(0);
    return probe.listen(endpoint{host, 0})->local_endpoint().port;
}

std::unique_ptr<parcelport> make_parcelport(parcelport_kind kind, std::size_t max_frame)
{
    if (kind == parcelport_kind::tcp)
        return std::make_unique<tcp_port>(max_frame);
    return std::make_unique<loopback_port>(max_frame);
}

}    // namespace amt::distrib
