// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/trace_builder.hpp>

#include <algorithm>

namespace tracescan
{
namespace
{
const BigInt& modulus()
{
    static const BigInt m = BigInt{1} << 256;
    return m;
}

BigInt to_signed(const Word& w)
{
    BigInt v = w.to_bigint();
    if (w.limb[3] >> 63)
        v -= modulus();
    return v;
}

Word wrap(const BigInt& v)
{
    return Word::from_bigint(v);
}

Word boolean(bool b)
{
    return Word{b ? 1u : 0u};
}

int byte_length(const Word& w)
{
    for (int i = 3; i >= 0; --i)
    {
        const uint64_t l = w.limb[static_cast<size_t>(i)];
        if (l == 0)
            continue;
        int bytes = 0;
        for (uint64_t x = l; x; x >>= 8)
            ++bytes;
        return i * 8 + bytes;
    }
    return 1;
}

uint64_t as_offset(const Word& w)
{
    if (!w.fits_u64() || w.low64() > (uint64_t{1} << 24))
        throw std::invalid_argument("trace builder: memory offset out of range");
    return w.low64();
}

}  // namespace

TraceBuilder::TraceBuilder(TransactionContext tx, std::vector<uint8_t> calldata)
{
    trace_.tx = std::move(tx);
    Frame f;
    f.self = trace_.tx.callee;
    f.caller = trace_.tx.sender;
    f.value = trace_.tx.value;
    f.calldata = std::move(calldata);
    f.gas = 3'000'000;
    frames_.push_back(std::move(f));
}

std::vector<uint8_t> TraceBuilder::words(const std::vector<Word>& ws)
{
    std::vector<uint8_t> out;
    for (const Word& w : ws)
        for (int i = 31; i >= 0; --i)
            out.push_back(static_cast<uint8_t>(w.limb[static_cast<size_t>(i / 8)] >> (8 * (i % 8))));
    return out;
}

Word TraceBuilder::digest(const std::vector<uint8_t>& data)
{
    Word w;
    for (size_t lane = 0; lane < 4; ++lane)
    {
        uint64_t h = 0xcbf29ce484222325ull ^ (lane * 0x9e3779b97f4a7c15ull);
        for (const uint8_t b : data)
        {
            h ^= b;
            h *= 0x100000001b3ull;
        }
        h ^= h >> 31;
        w.limb[lane] = h;
    }
    return w;
}

TraceBuilder& TraceBuilder::at(uint64_t pc)
{
    frame().pc = pc;
    return *this;
}

size_t TraceBuilder::record(Opcode op)
{
    if (finished_)
        throw std::logic_error("trace builder: transaction already ended");
    Frame& f = frame();
    TraceStep s;
    s.pc = f.pc;
    s.op = op;
    s.depth = depth();
    s.gas = f.gas;
    s.stack.reserve(f.stack.size());
    for (const Entry& e : f.stack)
        s.stack.push_back(e.word);
    f.gas = f.gas > 3 ? f.gas - 3 : 0;
    executing_.insert(f.self);
    trace_.steps.push_back(std::move(s));
    return trace_.steps.size() - 1;
}

TraceBuilder::Entry TraceBuilder::pop()
{
    Frame& f = frame();
    if (f.stack.empty())
        throw std::logic_error("trace builder: stack underflow");
    Entry e = f.stack.back();
    f.stack.pop_back();
    return e;
}

void TraceBuilder::push_value(const Word& w)
{
    frame().stack.push_back({w, ValueId{next_value_++}});
}

void TraceBuilder::advance(uint64_t next_pc)
{
    frame().pc = next_pc;
}

std::vector<uint8_t> TraceBuilder::read_memory(uint64_t offset, uint64_t size)
{
    std::vector<uint8_t> out(size, 0);
    const auto& mem = frame().memory;
    for (uint64_t i = 0; i < size; ++i)
        if (offset + i < mem.size())
            out[i] = mem[offset + i];
    return out;
}

void TraceBuilder::write_memory(uint64_t offset, const uint8_t* data, uint64_t size)
{
    auto& mem = frame().memory;
    if (mem.size() < offset + size)
        mem.resize((offset + size + 31) / 32 * 32, 0);
    std::copy(data, data + size, mem.begin() + static_cast<std::ptrdiff_t>(offset));
}

size_t TraceBuilder::push(const Word& w, int bytes)
{
    const int n = bytes > 0 ? bytes : byte_length(w);
    const size_t i = record(push_n(n));
    push_value(w);
    advance(frame().pc + 1 + static_cast<uint64_t>(n));
    return i;
}

size_t TraceBuilder::op(Opcode op)
{
    if (is_call_like(op) || is_push(op))
        throw std::invalid_argument("trace builder: use push/call for " + std::string(name(op)));
    const size_t i = record(op);
    Frame& f = frame();
    uint64_t next_pc = f.pc + 1;

    if (is_dup(op))
    {
        const size_t n = static_cast<size_t>(dup_depth(op));
        push_value(f.stack.at(f.stack.size() - n).word);
        advance(next_pc);
        return i;
    }
    if (is_swap(op))
    {
        const size_t n = static_cast<size_t>(swap_depth(op));
        std::swap(f.stack.back(), f.stack.at(f.stack.size() - 1 - n));
        advance(next_pc);
        return i;
    }

    const auto arg = [&] { return pop().word; };
    switch (op)
    {
    case Opcode::ADD: { const Word a = arg(), b = arg(); push_value(wrap(a.to_bigint() + b.to_bigint())); break; }
    case Opcode::SUB: { const Word a = arg(), b = arg(); push_value(wrap(a.to_bigint() - b.to_bigint())); break; }
    case Opcode::MUL: { const Word a = arg(), b = arg(); push_value(wrap(a.to_bigint() * b.to_bigint())); break; }
    case Opcode::DIV:
    {
        const Word a = arg(), b = arg();
        push_value(b.is_zero() ? Word{} : wrap(a.to_bigint() / b.to_bigint()));
        break;
    }
    case Opcode::SDIV:
    {
        const Word a = arg(), b = arg();
        push_value(b.is_zero() ? Word{} : wrap(to_signed(a) / to_signed(b)));
        break;
    }
    case Opcode::MOD:
    {
        const Word a = arg(), b = arg();
        push_value(b.is_zero() ? Word{} : wrap(a.to_bigint() % b.to_bigint()));
        break;
    }
    case Opcode::SMOD:
    {
        const Word a = arg(), b = arg();
        push_value(b.is_zero() ? Word{} : wrap(to_signed(a) % to_signed(b)));
        break;
    }
    case Opcode::EXP:
    {
        const Word a = arg(), b = arg();
        push_value(wrap(boost::multiprecision::powm(a.to_bigint(), b.to_bigint(), modulus())));
        break;
    }
    case Opcode::SIGNEXTEND:
    {
        const Word b = arg(), x = arg();
        if (!b.fits_u64() || b.low64() >= 31)
            push_value(x);
        else
        {
            const unsigned bits = 8 * (static_cast<unsigned>(b.low64()) + 1);
            const BigInt low = x.to_bigint() & ((BigInt{1} << bits) - 1);
            const bool negative = bit_test(low, bits - 1);
            push_value(wrap(negative ? BigInt{low - (BigInt{1} << bits)} : low));
        }
        break;
    }
    case Opcode::LT: { const Word a = arg(), b = arg(); push_value(boolean(a < b)); break; }
    case Opcode::GT: { const Word a = arg(), b = arg(); push_value(boolean(a > b)); break; }
    case Opcode::SLT: { const Word a = arg(), b = arg(); push_value(boolean(to_signed(a) < to_signed(b))); break; }
    case Opcode::SGT: { const Word a = arg(), b = arg(); push_value(boolean(to_signed(a) > to_signed(b))); break; }
    case Opcode::EQ: { const Word a = arg(), b = arg(); push_value(boolean(a == b)); break; }
    case Opcode::ISZERO: push_value(boolean(arg().is_zero())); break;
    case Opcode::AND: { const Word a = arg(), b = arg(); push_value(wrap(a.to_bigint() & b.to_bigint())); break; }
    case Opcode::OR: { const Word a = arg(), b = arg(); push_value(wrap(a.to_bigint() | b.to_bigint())); break; }
    case Opcode::XOR: { const Word a = arg(), b = arg(); push_value(wrap(a.to_bigint() ^ b.to_bigint())); break; }
    case Opcode::NOT: push_value(wrap(modulus() - 1 - arg().to_bigint())); break;
    case Opcode::SHL:
    {
        const Word s = arg(), v = arg();
        push_value(!s.fits_u64() || s.low64() >= 256 ? Word{} : wrap(v.to_bigint() << static_cast<unsigned>(s.low64())));
        break;
    }
    case Opcode::SHR:
    {
        const Word s = arg(), v = arg();
        push_value(!s.fits_u64() || s.low64() >= 256 ? Word{} : wrap(v.to_bigint() >> static_cast<unsigned>(s.low64())));
        break;
    }
    case Opcode::ADDRESS: push_value(f.self.to_word()); break;
    case Opcode::CALLER: push_value(f.caller.to_word()); break;
    case Opcode::ORIGIN: push_value(trace_.tx.sender.to_word()); break;
    case Opcode::CALLVALUE: push_value(Word::from_bigint(BigInt(f.value))); break;
    case Opcode::CALLDATASIZE: push_value(Word{f.calldata.size()}); break;
    case Opcode::NUMBER: push_value(Word{trace_.tx.block_number}); break;
    case Opcode::TIMESTAMP: push_value(Word{1'500'000'000 + trace_.tx.block_number * 13}); break;
    case Opcode::GAS: push_value(Word{f.gas}); break;
    case Opcode::PC: push_value(Word{trace_.steps[i].pc}); break;
    case Opcode::MSIZE: push_value(Word{f.memory.size()}); break;
    case Opcode::CALLDATALOAD:
    {
        const Word off = arg();
        std::vector<uint8_t> bytes(32, 0);
        if (off.fits_u64())
            for (uint64_t k = 0; k < 32; ++k)
                if (off.low64() + k < f.calldata.size())
                    bytes[k] = f.calldata[off.low64() + k];
        Word w;
        for (size_t k = 0; k < 32; ++k)
            w.limb[(31 - k) / 8] |= uint64_t{bytes[k]} << (8 * ((31 - k) % 8));
        push_value(w);
        break;
    }
    case Opcode::POP: arg(); break;
    case Opcode::MLOAD:
    {
        const auto bytes = read_memory(as_offset(arg()), 32);
        Word w;
        for (size_t k = 0; k < 32; ++k)
            w.limb[(31 - k) / 8] |= uint64_t{bytes[k]} << (8 * ((31 - k) % 8));
        push_value(w);
        break;
    }
    case Opcode::MSTORE:
    {
        const uint64_t off = as_offset(arg());
        const auto bytes = words({arg()});
        write_memory(off, bytes.data(), 32);
        break;
    }
    case Opcode::MSTORE8:
    {
        const uint64_t off = as_offset(arg());
        const uint8_t b = static_cast<uint8_t>(arg().low64());
        write_memory(off, &b, 1);
        break;
    }
    case Opcode::SLOAD:
    {
        const Word key = arg();
        const auto& st = storage_[f.self];
        const auto it = st.find(key);
        push_value(it == st.end() ? Word{} : it->second);
        break;
    }
    case Opcode::SSTORE:
    {
        const Word key = arg();
        storage_[f.self][key] = arg();
        break;
    }
    case Opcode::JUMP: next_pc = as_offset(arg()); break;
    case Opcode::JUMPI:
    {
        const Word dest = arg();
        if (!arg().is_zero())
            next_pc = as_offset(dest);
        break;
    }
    case Opcode::JUMPDEST: break;
    case Opcode::SHA3:
    {
        const uint64_t off = as_offset(arg());
        const uint64_t size = as_offset(arg());
        push_value(digest(read_memory(off, size)));
        break;
    }
    case Opcode::CALLDATACOPY:
    {
        const uint64_t dst = as_offset(arg());
        const uint64_t off = as_offset(arg());
        const uint64_t size = as_offset(arg());
        std::vector<uint8_t> bytes(size, 0);
        for (uint64_t k = 0; k < size; ++k)
            if (off + k < f.calldata.size())
                bytes[k] = f.calldata[off + k];
        if (size)
        {
            write_memory(dst, bytes.data(), size);
            ++next_value_;  // the extractor stages copied calldata as one value
        }
        break;
    }
    default:
        if (op >= Opcode::LOG0 && op <= Opcode::LOG4)
        {
            for (int k = 0; k < 2 + static_cast<int>(op) - static_cast<int>(Opcode::LOG0); ++k)
                arg();
            break;
        }
        throw std::invalid_argument("trace builder: unsupported opcode " + std::string(name(op)));
    }
    advance(next_pc);
    return i;
}

size_t TraceBuilder::call_prepared(Opcode op, Enter how, std::optional<Address> created)
{
    if (!is_call_like(op))
        throw std::invalid_argument("trace builder: not a call");
    const size_t i = record(op);
    Frame& f = frame();
    Frame callee;
    callee.call_step = i;
    callee.call_op = op;

    Region args;
    if (is_create(op))
    {
        callee.value = pop().word.to_wei();
        args.offset = as_offset(pop().word);
        args.size = as_offset(pop().word);
        if (op == Opcode::CREATE2)
            pop();
        if (!created)
            throw std::invalid_argument("trace builder: CREATE needs the created address");
        callee.self = *created;
        callee.caller = f.self;
        callee.created = created;
    }
    else
    {
        pop();  // gas
        const Address target = Address::from_word(pop().word);
        if (carries_value(op))
            callee.value = pop().word.to_wei();
        args.offset = as_offset(pop().word);
        args.size = as_offset(pop().word);
        callee.ret_region.offset = as_offset(pop().word);
        callee.ret_region.size = as_offset(pop().word);
        switch (op)
        {
        case Opcode::DELEGATECALL:
            callee.self = f.self;
            callee.caller = f.caller;
            callee.value = f.value;
            break;
        case Opcode::CALLCODE:
            callee.self = f.self;
            callee.caller = f.self;
            break;
        default:
            callee.self = target;
            callee.caller = f.self;
            break;
        }
        callee.calldata = read_memory(args.offset, args.size);
    }

    if (how == Enter::frame)
    {
        callee.gas = f.gas > 10000 ? f.gas - 10000 : f.gas;
        callee.pc = 0;
        frames_.push_back(std::move(callee));
        return i;
    }
    const bool ok = how == Enter::succeed;
    push_value(is_create(op) ? (ok ? created->to_word() : Word{}) : boolean(ok));
    advance(frame().pc + 1);
    return i;
}

size_t TraceBuilder::call(
    Opcode op, const Address& target, const Wei& value, Enter how, Region args, Region ret, uint64_t gas)
{
    push(ret.size);
    push(ret.offset);
    push(args.size);
    push(args.offset);
    if (carries_value(op))
        push(Word::from_bigint(BigInt(value)));
    push(target);
    push(Word{gas}, 2);
    return call_prepared(op, how);
}

size_t TraceBuilder::create(const Wei& value, const Address& created, Region init)
{
    push(init.size);
    push(init.offset);
    push(Word::from_bigint(BigInt(value)));
    return call_prepared(Opcode::CREATE, Enter::frame, created);
}

size_t TraceBuilder::ret(Opcode exit)
{
    if (depth() < 2)
        throw std::logic_error("trace builder: ret at depth 1, use end");
    const size_t i = record(exit);
    std::vector<uint8_t> data;
    switch (exit)
    {
    case Opcode::RETURN:
    case Opcode::REVERT:
    {
        const uint64_t off = as_offset(pop().word);
        const uint64_t size = as_offset(pop().word);
        data = read_memory(off, size);
        break;
    }
    case Opcode::SELFDESTRUCT:
        pop();
        break;
    case Opcode::STOP:
    case Opcode::INVALID:
        break;
    default:
        throw std::invalid_argument("trace builder: not a frame exit");
    }
    const bool ok = exit != Opcode::REVERT && exit != Opcode::INVALID;
    Frame done = std::move(frames_.back());
    frames_.pop_back();

    Frame& caller = frame();
    if (ok && !is_create(done.call_op) && done.ret_region.size)
    {
        data.resize(done.ret_region.size, 0);
        write_memory(done.ret_region.offset, data.data(), done.ret_region.size);
    }
    push_value(is_create(done.call_op) ? (ok ? done.created->to_word() : Word{}) : boolean(ok));
    caller.pc = trace_.steps[done.call_step].pc + 1;
    return i;
}

size_t TraceBuilder::end(Opcode exit)
{
    if (depth() != 1)
        throw std::logic_error("trace builder: end inside a call frame");
    const size_t i = record(exit);
    finished_ = true;
    return i;
}

const Word& TraceBuilder::top(size_t k) const
{
    const auto& st = frame().stack;
    return st.at(st.size() - 1 - k).word;
}

ValueId TraceBuilder::top_id(size_t k) const
{
    const auto& st = frame().stack;
    return st.at(st.size() - 1 - k).id;
}

ValueId TraceBuilder::last_value() const
{
    if (next_value_ == 0)
        throw std::logic_error("trace builder: no values yet");
    return ValueId{next_value_ - 1};
}

ExecutionTrace TraceBuilder::finish() &&
{
    return std::move(trace_);
}

}  // namespace tracescan
