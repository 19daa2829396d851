// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include "ips/cli.hpp"

int main(int argc, char** argv) { return ips::cli::run(argc, argv); }
