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

#include "contendscope/resource.h"

namespace contendscope {

namespace {

constexpr std::array<ResourceRequest, 1> kSchedulingRequests = {
    ResourceRequest::kSlotWait};
constexpr std::array<ResourceRequest, 3> kCpuRequests = {
    ResourceRequest::kCpuMonitorLock, ResourceRequest::kCpuGc,
    ResourceRequest::kCpuOsSched};
constexpr std::array<ResourceRequest, 1> kNetworkRequests = {
    ResourceRequest::kNetworkFetch};
constexpr std::array<ResourceRequest, 2> kIoRequests = {
    ResourceRequest::kIoRead, ResourceRequest::kIoWrite};
constexpr std::array<ResourceRequest, 2> kMemoryRequests = {
    ResourceRequest::kStorageMemory, ResourceRequest::kExecutionMemory};

constexpr std::array<std::string_view, kNumRequests> kRequestNames = {
    "SlotWait",     "CpuMonitorLock", "CpuGc",
    "CpuOsSched",   "NetworkFetch",   "IoRead",
    "IoWrite",      "StorageMemory",  "ExecutionMemory"};

constexpr std::array<std::string_view, kNumResourceClasses> kClassNames = {
    "SchedulingQueue", "Cpu", "Network", "Io", "Memory"};

}  // namespace

ResourceClass ClassOf(ResourceRequest request) {
  switch (request) {
    case ResourceRequest::kSlotWait:
      return ResourceClass::kSchedulingQueue;
    case ResourceRequest::kCpuMonitorLock:
    case ResourceRequest::kCpuGc:
    case ResourceRequest::kCpuOsSched:
      return ResourceClass::kCpu;
    case ResourceRequest::kNetworkFetch:
      return ResourceClass::kNetwork;
    case ResourceRequest::kIoRead:
    case ResourceRequest::kIoWrite:
      return ResourceClass::kIo;
    case ResourceRequest::kStorageMemory:
    case ResourceRequest::kExecutionMemory:
      return ResourceClass::kMemory;
  }
  return ResourceClass::kSchedulingQueue;
}

std::span<const ResourceRequest> RequestsOf(ResourceClass cls) {
  switch (cls) {
    case ResourceClass::kSchedulingQueue:
      return kSchedulingRequests;
    case ResourceClass::kCpu:
      return kCpuRequests;
    case ResourceClass::kNetwork:
      return kNetworkRequests;
    case ResourceClass::kIo:
      return kIoRequests;
    case ResourceClass::kMemory:
      return kMemoryRequests;
  }
  return {};
}

std::string_view Name(ResourceRequest request) {
  return kRequestNames[Index(request)];
}

std::string_view Name(ResourceClass cls) { return kClassNames[Index(cls)]; }

std::optional<ResourceRequest> ParseRequest(std::string_view name) {
  for (ResourceRequest r : kAllRequests) {
    if (Name(r) == name) return r;
  }
  return std::nullopt;
}

std::optional<ResourceClass> ParseClass(std::string_view name) {
  for (ResourceClass c : kAllClasses) {
    if (Name(c) == name) return c;
  }
  return std::nullopt;
}

}  // namespace contendscope
