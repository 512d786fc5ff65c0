#include "net_recorder.hpp"

#include <dlfcn.h>
#include <sys/socket.h>

#include <atomic>

namespace {
std::atomic<int> g_connects{0};
std::atomic<int> g_sockets{0};
}  // namespace

extern "C" int connect(int fd, const struct sockaddr* addr, socklen_t len) {
    using Fn = int (*)(int, const struct sockaddr*, socklen_t);
    static Fn real = reinterpret_cast<Fn>(dlsym(RTLD_NEXT, "connect"));
    ++g_connects;
    return real(fd, addr, len);
}

extern "C" int socket(int domain, int type, int protocol) {
    using Fn = int (*)(int, int, int);
    static Fn real = reinterpret_cast<Fn>(dlsym(RTLD_NEXT, "socket"));
    ++g_sockets;
    return real(domain, type, protocol);
}

namespace vulnsev::testing {

int connect_calls() { return g_connects; }
int socket_calls() { return g_sockets; }
void reset_net_counters() {
    g_connects = 0;
    g_sockets = 0;
}

}  // namespace vulnsev::testing
