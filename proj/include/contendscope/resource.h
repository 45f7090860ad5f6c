/*
 * ContendScope
 * Copyright (c) The ContendScope Authors.
 * All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * THIS CODE IS PROVIDED ON AN *AS IS* BASIS, WITHOUT WARRANTIES OR
 * CONDITIONS OF ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT
 * LIMITATION ANY IMPLIED WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR
 * A PARTICULAR PURPOSE, MERCHANTABLITY OR NON-INFRINGEMENT.
 *
 * See the Apache Version 2.0 License for specific language governing
 * permissions and limitations under the License.
 */

// Resource taxonomy: the five contended resource classes and the finer
// resource requests a task can block on.

#ifndef CONTENDSCOPE_RESOURCE_H
#define CONTENDSCOPE_RESOURCE_H

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace contendscope {

enum class ResourceClass : std::uint8_t {
  kSchedulingQueue,
  kCpu,
  kNetwork,
  kIo,
  kMemory,
};

inline constexpr std::size_t kNumResourceClasses = 5;

// Units of "acquired" per request: slot offers for kSlotWait, cpu-seconds for
// the Cpu requests, bytes for everything else.
enum class ResourceRequest : std::uint8_t {
  kSlotWait,
  kCpuMonitorLock,
  kCpuGc,
  kCpuOsSched,
  kNetworkFetch,
  kIoRead,
  kIoWrite,
  kStorageMemory,
  kExecutionMemory,
};

inline constexpr std::size_t kNumRequests = 9;

template <typename T>
using PerRequest = std::array<T, kNumRequests>;

inline constexpr std::array<ResourceClass, kNumResourceClasses> kAllClasses = {
    ResourceClass::kSchedulingQueue, ResourceClass::kCpu,
    ResourceClass::kNetwork, ResourceClass::kIo, ResourceClass::kMemory};

inline constexpr std::array<ResourceRequest, kNumRequests> kAllRequests = {
    ResourceRequest::kSlotWait,      ResourceRequest::kCpuMonitorLock,
    ResourceRequest::kCpuGc,         ResourceRequest::kCpuOsSched,
    ResourceRequest::kNetworkFetch,  ResourceRequest::kIoRead,
    ResourceRequest::kIoWrite,       ResourceRequest::kStorageMemory,
    ResourceRequest::kExecutionMemory};

constexpr std::size_t Index(ResourceRequest r) {
  return static_cast<std::size_t>(r);
}
constexpr std::size_t Index(ResourceClass c) {
  return static_cast<std::size_t>(c);
}

ResourceClass ClassOf(ResourceRequest request);

// Requests belonging to a class, in declaration order. The size of the span is
// the number of distinct waits a class can be broken down into.
std::span<const ResourceRequest> RequestsOf(ResourceClass cls);

std::string_view Name(ResourceRequest request);
std::string_view Name(ResourceClass cls);

std::optional<ResourceRequest> ParseRequest(std::string_view name);
std::optional<ResourceClass> ParseClass(std::string_view name);

}  // namespace contendscope

#endif  // CONTENDSCOPE_RESOURCE_H
