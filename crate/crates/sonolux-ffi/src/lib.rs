//! C ABI for sonolux (placeholder during bring-up).
