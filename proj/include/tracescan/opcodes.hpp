// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace tracescan
{
enum class Opcode : uint8_t
{
    STOP = 0x00,
    ADD = 0x01,
    MUL = 0x02,
    SUB = 0x03,
    DIV = 0x04,
    SDIV = 0x05,
    MOD = 0x06,
    SMOD = 0x07,
    ADDMOD = 0x08,
    MULMOD = 0x09,
    EXP = 0x0a,
    SIGNEXTEND = 0x0b,

    LT = 0x10,
    GT = 0x11,
    SLT = 0x12,
    SGT = 0x13,
    EQ = 0x14,
    ISZERO = 0x15,
    AND = 0x16,
    OR = 0x17,
    XOR = 0x18,
    NOT = 0x19,
    BYTE = 0x1a,
    SHL = 0x1b,
    SHR = 0x1c,
    SAR = 0x1d,

    SHA3 = 0x20,

    ADDRESS = 0x30,
    BALANCE = 0x31,
    ORIGIN = 0x32,
    CALLER = 0x33,
    CALLVALUE = 0x34,
    CALLDATALOAD = 0x35,
    CALLDATASIZE = 0x36,
    CALLDATACOPY = 0x37,
    CODESIZE = 0x38,
    CODECOPY = 0x39,
    GASPRICE = 0x3a,
    EXTCODESIZE = 0x3b,
    EXTCODECOPY = 0x3c,
    RETURNDATASIZE = 0x3d,
    RETURNDATACOPY = 0x3e,
    EXTCODEHASH = 0x3f,

    BLOCKHASH = 0x40,
    COINBASE = 0x41,
    TIMESTAMP = 0x42,
    NUMBER = 0x43,
    PREVRANDAO = 0x44,
    GASLIMIT = 0x45,
    CHAINID = 0x46,
    SELFBALANCE = 0x47,
    BASEFEE = 0x48,
    BLOBHASH = 0x49,
    BLOBBASEFEE = 0x4a,

    POP = 0x50,
    MLOAD = 0x51,
    MSTORE = 0x52,
    MSTORE8 = 0x53,
    SLOAD = 0x54,
    SSTORE = 0x55,
    JUMP = 0x56,
    JUMPI = 0x57,
    PC = 0x58,
    MSIZE = 0x59,
    GAS = 0x5a,
    JUMPDEST = 0x5b,
    TLOAD = 0x5c,
    TSTORE = 0x5d,
    MCOPY = 0x5e,
    PUSH0 = 0x5f,

    PUSH1 = 0x60,
    PUSH32 = 0x7f,
    DUP1 = 0x80,
    DUP16 = 0x8f,
    SWAP1 = 0x90,
    SWAP16 = 0x9f,
    LOG0 = 0xa0,
    LOG4 = 0xa4,

    CREATE = 0xf0,
    CALL = 0xf1,
    CALLCODE = 0xf2,
    RETURN = 0xf3,
    DELEGATECALL = 0xf4,
    CREATE2 = 0xf5,
    STATICCALL = 0xfa,
    REVERT = 0xfd,
    INVALID = 0xfe,
    SELFDESTRUCT = 0xff,
};

struct OpcodeInfo
{
    std::string_view name;
    uint8_t pops = 0;
    uint8_t pushes = 0;
    bool defined = false;
};

/// Stack effect and canonical mnemonic; `defined` is false for unassigned bytes.
const OpcodeInfo& info(Opcode op) noexcept;

/// Resolves a trace mnemonic ("PUSH1", "SHA3"/"KECCAK256", "DIFFICULTY"/"PREVRANDAO", ...).
std::optional<Opcode> opcode_from_name(std::string_view name) noexcept;

inline std::string_view name(Opcode op) noexcept
{
    return info(op).name;
}

constexpr bool is_push(Opcode op) noexcept
{
    return op >= Opcode::PUSH0 && op <= Opcode::PUSH32;
}
constexpr bool is_dup(Opcode op) noexcept
{
    return op >= Opcode::DUP1 && op <= Opcode::DUP16;
}
constexpr bool is_swap(Opcode op) noexcept
{
    return op >= Opcode::SWAP1 && op <= Opcode::SWAP16;
}
constexpr int dup_depth(Opcode op) noexcept
{
    return static_cast<int>(op) - static_cast<int>(Opcode::DUP1) + 1;
}
constexpr int swap_depth(Opcode op) noexcept
{
    return static_cast<int>(op) - static_cast<int>(Opcode::SWAP1) + 1;
}
constexpr Opcode dup_n(int n) noexcept
{
    return static_cast<Opcode>(static_cast<int>(Opcode::DUP1) + n - 1);
}
constexpr Opcode swap_n(int n) noexcept
{
    return static_cast<Opcode>(static_cast<int>(Opcode::SWAP1) + n - 1);
}
constexpr Opcode push_n(int n) noexcept
{
    return static_cast<Opcode>(static_cast<int>(Opcode::PUSH0) + n);
}

/// Opcodes that open a new call frame when the target has code.
constexpr bool is_call_like(Opcode op) noexcept
{
    switch (op)
    {
    case Opcode::CALL:
    case Opcode::CALLCODE:
    case Opcode::DELEGATECALL:
    case Opcode::STATICCALL:
    case Opcode::CREATE:
    case Opcode::CREATE2:
        return true;
    default:
        return false;
    }
}

constexpr bool is_create(Opcode op) noexcept
{
    return op == Opcode::CREATE || op == Opcode::CREATE2;
}

/// CALL and CALLCODE carry an explicit value operand.
constexpr bool carries_value(Opcode op) noexcept
{
    return op == Opcode::CALL || op == Opcode::CALLCODE;
}

}  // namespace tracescan
