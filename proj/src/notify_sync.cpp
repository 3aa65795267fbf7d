// SPDX-License-Identifier: Apache-2.0

#include "cv/context.hpp"
#include "cv/notify.hpp"

namespace cv::notify {

bool check_and_sync(PendingFlag& flag, Context& ctx, StoreHandle& handle) {
  if (!flag.test_and_clear()) return false;
  ctx.sync(handle);
  return true;
}

}  // namespace cv::notify
