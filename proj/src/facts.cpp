// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/facts.hpp>
#include <tracescan/memory_map.hpp>

#include <fstream>
#include <limits>
#include <sstream>

namespace tracescan
{
namespace
{
constexpr size_t kDeadlinePollInterval = 1024;

struct Frame
{
    Address self;
    Address code;
    Address caller;
    std::vector<ValueId> shadow;
    MemoryMap memory;
    std::optional<size_t> opener;  ///< index into calls of the site that opened this frame
};

std::optional<uint64_t> small(const Word& w) noexcept
{
    if (!w.fits_u64() || w.low64() > MemoryMap::kLimit)
        return std::nullopt;
    return w.low64();
}

std::optional<std::pair<uint64_t, uint64_t>> region(const Word& offset, const Word& size) noexcept
{
    const auto len = small(size);
    if (!len)
        return std::nullopt;
    if (*len == 0)
        return std::pair<uint64_t, uint64_t>{0, 0};
    const auto off = small(offset);
    if (!off)
        return std::nullopt;
    return std::pair<uint64_t, uint64_t>{*off, *off + *len};
}

/// Return step of every call site that opens a frame, resolved ahead of replay so
/// created addresses are known when the constructor frame starts.
std::vector<std::optional<size_t>> resolve_returns(const std::vector<TraceStep>& steps)
{
    std::vector<std::optional<size_t>> ret(steps.size());
    std::vector<size_t> pending;
    for (size_t i = 0; i + 1 < steps.size(); ++i)
    {
        const auto d = steps[i].depth;
        const auto next = steps[i + 1].depth;
        if (next > d)
            pending.push_back(i);
        else if (next == d && is_call_like(steps[i].op))
            ret[i] = i + 1;
        else if (next < d)
        {
            for (uint32_t k = 0; k < d - next && !pending.empty(); ++k)
            {
                if (k + 1 == d - next)
                    ret[pending.back()] = i + 1;
                pending.pop_back();
            }
        }
    }
    return ret;
}

class Replayer
{
public:
    Replayer(const ExecutionTrace& trace, const ExtractOptions& options)
      : trace_{trace}, steps_{trace.steps}, options_{options}
    {}

    ExtractionResult run()
    {
        if (steps_.empty())
            return std::move(out_);

        returns_ = resolve_returns(steps_);
        frames_.push_back(Frame{trace_.tx.callee, trace_.tx.callee, trace_.tx.sender, {}, {}, {}});
        if (trace_.tx.value != 0)
            out_.ledger.push_back({LedgerEvent::Kind::Credit, 0, trace_.tx.sender, trace_.tx.callee,
                trace_.tx.value});

        for (size_t i = 0; i < steps_.size(); ++i)
        {
            if (i % kDeadlinePollInterval == 0)
                options_.deadline.check();
            step(i);
        }
        out_.ended_inside_frame = frames_.size() > 1;
        return std::move(out_);
    }

private:
    ValueId fresh(const TraceStep& s)
    {
        const ValueId v{out_.values.size()};
        out_.values.push_back({s.pc, s.op});
        return v;
    }

    [[noreturn]] void fail(ReplayError::Kind kind, size_t i, const std::string& what) const
    {
        std::ostringstream msg;
        msg << "step " << i << " (pc " << steps_[i].pc << ", " << name(steps_[i].op)
            << "): " << what;
        throw ReplayError(kind, msg.str());
    }

    void step(size_t i)
    {
        const TraceStep& s = steps_[i];
        Frame& f = frames_.back();
        if (frames_.size() != s.depth)
            fail(ReplayError::Kind::StackMismatch, i, "frame stack out of sync with depth");
        if (f.shadow.size() != s.stack.size())
        {
            fail(ReplayError::Kind::StackMismatch, i,
                "shadow stack has " + std::to_string(f.shadow.size()) + " entries, trace has " +
                    std::to_string(s.stack.size()));
        }
        ++out_.stack_checks;
        out_.executing.insert(f.self);

        const OpcodeInfo& oi = info(s.op);
        if (s.stack.size() < oi.pops)
            fail(ReplayError::Kind::ArityError, i, "stack underflow");

        const TraceStep* next = i + 1 < steps_.size() ? &steps_[i + 1] : nullptr;
        const bool completes = next && next->depth == s.depth;

        if (is_call_like(s.op))
            call(i, f);
        else
        {
            if (next && next->depth > s.depth)
                fail(ReplayError::Kind::StackMismatch, i, "depth increases without a call");
            environment_facts(i, f);
            if (completes)
                apply(i, f, *next);
        }

        if (next && next->depth < s.depth)
            unwind(i + 1);
    }

    /// Operand `k` (0 = top of stack).
    static const Word& operand(const TraceStep& s, size_t k) { return s.stack[s.stack.size() - 1 - k]; }
    static ValueId shadow_operand(const Frame& f, size_t k) { return f.shadow[f.shadow.size() - 1 - k]; }

    void environment_facts(size_t i, Frame& f)
    {
        const TraceStep& s = steps_[i];
        auto& db = out_.facts;
        switch (s.op)
        {
        case Opcode::JUMPI:
            db.in_condition.insert(shadow_operand(f, 1));
            break;
        case Opcode::SSTORE:
        {
            const ValueId key = shadow_operand(f, 0);
            db.restricted_inst.insert(key);
            db.tx_sstore.insert({trace_.tx.block_number, trace_.tx.tx_index, operand(s, 0)});
            out_.sensitive.push_back({key, i, s.pc, s.op, f.self, std::nullopt});
            out_.storage.push_back({i, s.pc, true, f.self, operand(s, 0)});
            break;
        }
        case Opcode::SLOAD:
            db.tx_sload.insert({trace_.tx.block_number, trace_.tx.tx_index, operand(s, 0)});
            out_.storage.push_back({i, s.pc, false, f.self, operand(s, 0)});
            break;
        case Opcode::SELFDESTRUCT:
        {
            const ValueId b = shadow_operand(f, 0);
            const Address beneficiary = Address::from_word(operand(s, 0));
            db.selfdestruct.insert(b);
            out_.sensitive.push_back({b, i, s.pc, s.op, f.self, beneficiary});
            out_.ledger.push_back({LedgerEvent::Kind::SelfDestruct, i, f.self, beneficiary, 0});
            break;
        }
        default:
            break;
        }
    }

    /// Stack effect of a non-call instruction that continues in the same frame.
    void apply(size_t i, Frame& f, const TraceStep& next)
    {
        const TraceStep& s = steps_[i];
        auto& db = out_.facts;
        auto& sh = f.shadow;

        if (is_swap(s.op))
        {
            std::swap(sh[sh.size() - 1], sh[sh.size() - 1 - static_cast<size_t>(swap_depth(s.op))]);
            return;
        }
        if (is_dup(s.op))
        {
            const ValueId orig = sh[sh.size() - static_cast<size_t>(dup_depth(s.op))];
            const ValueId copy = fresh(s);
            db.is_output.insert({copy, orig});
            sh.push_back(copy);
            return;
        }

        const OpcodeInfo& oi = info(s.op);
        std::array<ValueId, 8> in{};
        for (size_t k = 0; k < oi.pops; ++k)
            in[k] = shadow_operand(f, k);
        sh.resize(sh.size() - oi.pops);

        switch (s.op)
        {
        case Opcode::MSTORE:
        case Opcode::MSTORE8:
            if (const auto off = small(operand(s, 0)))
                f.memory.write(*off, *off + (s.op == Opcode::MSTORE ? 32 : 1), in[1]);
            return;
        case Opcode::MCOPY:
        {
            const auto dst = small(operand(s, 0));
            const auto src = small(operand(s, 1));
            const auto len = small(operand(s, 2));
            if (dst && src && len)
                f.memory.copy(*dst, *src, *len);
            return;
        }
        case Opcode::CALLDATACOPY:
            if (const auto r = region(operand(s, 0), operand(s, 2)); r && r->first < r->second)
            {
                const ValueId m = fresh(s);
                db.load_data.insert(m);
                f.memory.write(r->first, r->second, m);
            }
            return;
        case Opcode::CODECOPY:
        case Opcode::RETURNDATACOPY:
            if (const auto r = region(operand(s, 0), operand(s, 2)))
                f.memory.erase(r->first, r->second);
            return;
        case Opcode::EXTCODECOPY:
            if (const auto r = region(operand(s, 1), operand(s, 3)))
                f.memory.erase(r->first, r->second);
            return;
        default:
            break;
        }

        if (oi.pushes == 0)
            return;

        const ValueId v = fresh(s);
        for (size_t k = 0; k < oi.pops; ++k)
            db.is_output.insert({v, in[k]});
        sh.push_back(v);

        switch (s.op)
        {
        case Opcode::MLOAD:
            if (const auto off = small(operand(s, 0)))
                for (const ValueId src : f.memory.owners(*off, *off + 32))
                    db.is_output.insert({v, src});
            break;
        case Opcode::SHA3:
            if (const auto r = region(operand(s, 0), operand(s, 1)))
                for (const ValueId src : f.memory.owners(r->first, r->second))
                    db.is_output.insert({v, src});
            break;
        case Opcode::CALLER:
            db.caller.insert({v, f.caller});
            break;
        case Opcode::CALLDATALOAD:
            db.load_data.insert(v);
            break;
        case Opcode::SIGNEXTEND:
        {
            db.is_signed.insert(v);
            const Word& b = operand(s, 0);
            if (b.fits_u64())
            {
                switch (b.low64())
                {
                case 0:
                case 1:
                case 3:
                case 7:
                case 15:
                case 31:
                    db.size.insert({v, static_cast<uint32_t>(8 * (b.low64() + 1))});
                    break;
                default:
                    break;
                }
            }
            break;
        }
        case Opcode::SDIV:
        case Opcode::SMOD:
        case Opcode::SLT:
        case Opcode::SGT:
            db.is_signed.insert(v);
            break;
        case Opcode::AND:
        {
            const auto a = mask_width(operand(s, 0));
            const auto b = mask_width(operand(s, 1));
            if (a || b)
                db.size.insert({v, std::min(a.value_or(256), b.value_or(256))});
            break;
        }
        case Opcode::ADD:
        case Opcode::SUB:
        case Opcode::MUL:
        case Opcode::DIV:
        case Opcode::EXP:
            out_.arithmetic.push_back({i, s.pc, s.op, f.self, v, in[0], in[1], operand(s, 0),
                operand(s, 1), next.stack.back()});
            break;
        default:
            break;
        }
    }

    void call(size_t i, Frame& f)
    {
        const TraceStep& s = steps_[i];
        auto& db = out_.facts;
        const OpcodeInfo& oi = info(s.op);

        CallSite site;
        site.step = i;
        site.pc = s.pc;
        site.op = s.op;
        site.depth = s.depth;
        site.self = f.self;
        for (size_t k = 0; k < oi.pops; ++k)
            site.operands.push_back(shadow_operand(f, k));

        const auto ret = returns_[i];
        if (is_create(s.op))
        {
            site.value = operand(s, 0).to_wei();
            if (ret && !steps_[*ret].stack.empty())
                site.target = Address::from_word(steps_[*ret].stack.back());
        }
        else
        {
            const Word& target = operand(s, 1);
            site.target = Address::from_word(target);
            if (carries_value(s.op))
                site.value = operand(s, 2).to_wei();
            if (s.op != Opcode::STATICCALL)
            {
                db.restricted_inst.insert(site.operands[1]);
                out_.sensitive.push_back({site.operands[1], i, s.pc, s.op, f.self, site.target});
            }
            db.call.insert({f.self, site.target, site.value});
            if (s.op == Opcode::DELEGATECALL || s.op == Opcode::CALLCODE)
                db.call_entry.insert({s.pc, site.target});
        }

        f.shadow.resize(f.shadow.size() - oi.pops);

        const TraceStep* next = i + 1 < steps_.size() ? &steps_[i + 1] : nullptr;
        site.entered_frame = next && next->depth == s.depth + 1;
        const bool returns_here = next && next->depth == s.depth;

        const size_t index = out_.calls.size();
        out_.calls.push_back(std::move(site));
        CallSite& c = out_.calls.back();

        if (c.entered_frame || returns_here)
        {
            out_.ledger.push_back({LedgerEvent::Kind::Checkpoint, i, {}, {}, 0});
            if (c.value != 0)
            {
                const Address to = c.op == Opcode::CALLCODE ? f.self : c.target;
                out_.ledger.push_back({LedgerEvent::Kind::Transfer, i, f.self, to, c.value});
            }
        }

        if (c.entered_frame)
        {
            Frame callee;
            switch (c.op)
            {
            case Opcode::DELEGATECALL:
                callee.self = f.self;
                callee.caller = f.caller;
                break;
            case Opcode::CALLCODE:
                callee.self = f.self;
                callee.caller = f.self;
                break;
            default:
                callee.self = c.target;
                callee.caller = f.self;
                break;
            }
            callee.code = c.target;
            callee.opener = index;
            frames_.push_back(std::move(callee));
        }
        else if (returns_here)
            complete(index, i + 1);
    }

    /// Control is back in the frame that issued call `index`, at step `r`.
    void complete(size_t index, size_t r)
    {
        CallSite& c = out_.calls[index];
        const TraceStep& rs = steps_[r];
        Frame& f = frames_.back();
        auto& db = out_.facts;

        if (rs.stack.empty())
            fail(ReplayError::Kind::StackMismatch, r, "missing call result on the stack");

        c.completed = true;
        c.return_step = r;
        c.exit_pc = rs.pc;
        c.result = rs.stack.back();

        const ValueId v = fresh(steps_[c.step]);
        c.result_value = v;
        for (const ValueId op : c.operands)
            db.is_output.insert({v, op});
        f.shadow.push_back(v);

        if (is_create(c.op))
        {
            if (!c.result.is_zero())
                db.create.insert({c.self, c.target, c.value});
        }
        else
        {
            if (!c.target.is_precompile())
                db.call_result.insert(
                    {v, c.result.fits_u64() ? c.result.low64() : std::numeric_limits<uint64_t>::max()});
            if (c.op == Opcode::DELEGATECALL || c.op == Opcode::CALLCODE)
                db.call_exit.insert(rs.pc);

            const Word& ret_off = steps_[c.step].stack[steps_[c.step].stack.size() - c.operands.size() + 1];
            const Word& ret_len = steps_[c.step].stack[steps_[c.step].stack.size() - c.operands.size()];
            if (const auto reg = region(ret_off, ret_len))
                f.memory.erase(reg->first, reg->second);
        }

        out_.ledger.push_back({c.result.is_zero() ? LedgerEvent::Kind::Rollback : LedgerEvent::Kind::Commit,
            r, {}, {}, 0});
    }

    /// Depth dropped to that of step `r`; pop the exited frames.
    void unwind(size_t r)
    {
        const uint32_t target = steps_[r].depth;
        std::optional<size_t> opener;
        while (frames_.size() > target)
        {
            if (!frames_.back().opener)
                fail(ReplayError::Kind::UnmatchedReturn, r, "return without a pending call frame");
            if (opener)
                out_.ledger.push_back({LedgerEvent::Kind::Rollback, r, {}, {}, 0});
            opener = frames_.back().opener;
            frames_.pop_back();
        }
        if (frames_.empty() || !opener)
            fail(ReplayError::Kind::UnmatchedReturn, r, "return without a pending call frame");
        complete(*opener, r);
    }

    const ExecutionTrace& trace_;
    const std::vector<TraceStep>& steps_;
    const ExtractOptions& options_;
    std::vector<std::optional<size_t>> returns_;
    std::vector<Frame> frames_;
    ExtractionResult out_;
};

BigInt reinterpret(const BigInt& raw, uint32_t width, bool is_signed)
{
    const BigInt modulus = BigInt{1} << width;
    BigInt x = raw % modulus;
    if (x < 0)
        x += modulus;
    if (is_signed && x >= (modulus >> 1))
        x -= modulus;
    return x;
}

BigInt saturating_pow(const BigInt& base, const BigInt& exponent)
{
    static const BigInt cap = BigInt{1} << 512;
    if (exponent == 0)
        return 1;
    if (base == 0 || base == 1)
        return base;
    const bool negative = base < 0 && (exponent & 1) != 0;
    if (base == -1)
        return negative ? -1 : 1;
    BigInt acc = 1;
    const BigInt mag = abs(base);
    for (BigInt e = 0; e < exponent; ++e)
    {
        acc *= mag;
        if (acc >= cap)
        {
            acc = cap;
            break;
        }
    }
    return negative ? BigInt{-acc} : acc;
}

template <class Set, class Fn>
void write_relation(const std::filesystem::path& dir, const char* name, const Set& set, Fn&& row)
{
    std::ofstream out(dir / (std::string(name) + ".facts"));
    if (!out)
        throw std::runtime_error("cannot write " + (dir / name).string());
    for (const auto& t : set)
        out << row(t) << '\n';
}

std::string vid(ValueId v)
{
    return "v" + std::to_string(v.ordinal);
}

}  // namespace

std::string_view to_string(ReplayError::Kind kind) noexcept
{
    switch (kind)
    {
    case ReplayError::Kind::StackMismatch:
        return "StackMismatch";
    case ReplayError::Kind::ArityError:
        return "ArityError";
    case ReplayError::Kind::UnmatchedReturn:
        return "UnmatchedReturn";
    }
    return "ReplayError";
}

void FactDB::seal()
{
    is_output.seal();
    size.seal();
    is_signed.seal();
    in_condition.seal();
    call.seal();
    create.seal();
    expected_result.seal();
    actual_result.seal();
    call_result.seal();
    call_entry.seal();
    call_exit.seal();
    tx_sstore.seal();
    tx_sload.seal();
    caller.seal();
    load_data.seal();
    restricted_inst.seal();
    selfdestruct.seal();
}

size_t FactDB::total() const noexcept
{
    return is_output.size() + size.size() + is_signed.size() + in_condition.size() + call.size() +
           create.size() + expected_result.size() + actual_result.size() + call_result.size() +
           call_entry.size() + call_exit.size() + tx_sstore.size() + tx_sload.size() +
           caller.size() + load_data.size() + restricted_inst.size() + selfdestruct.size();
}

void dump_facts(const FactDB& db, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const auto pair_v = [](const auto& t) { return vid(t.first) + '\t' + vid(t.second); };
    const auto single = [](ValueId v) { return vid(v); };
    const auto transfer = [](const TransferFact& t) {
        return t.from.to_hex() + '\t' + t.to.to_hex() + '\t' + to_string(t.value);
    };
    const auto storage = [](const StorageFact& t) {
        return std::to_string(t.block) + '\t' + std::to_string(t.tx) + '\t' + t.key.to_hex();
    };
    const auto big = [](const auto& t) { return vid(t.first) + '\t' + to_string(t.second); };
    const auto num = [](const auto& t) { return vid(t.first) + '\t' + std::to_string(t.second); };

    write_relation(dir, "is_output", db.is_output, pair_v);
    write_relation(dir, "size", db.size, num);
    write_relation(dir, "is_signed", db.is_signed, single);
    write_relation(dir, "in_condition", db.in_condition, single);
    write_relation(dir, "call", db.call, transfer);
    write_relation(dir, "create", db.create, transfer);
    write_relation(dir, "expected_result", db.expected_result, big);
    write_relation(dir, "actual_result", db.actual_result, big);
    write_relation(dir, "call_result", db.call_result, num);
    write_relation(dir, "call_entry", db.call_entry,
        [](const auto& t) { return std::to_string(t.first) + '\t' + t.second.to_hex(); });
    write_relation(dir, "call_exit", db.call_exit, [](uint64_t pc) { return std::to_string(pc); });
    write_relation(dir, "tx_sstore", db.tx_sstore, storage);
    write_relation(dir, "tx_sload", db.tx_sload, storage);
    write_relation(dir, "caller", db.caller,
        [](const auto& t) { return vid(t.first) + '\t' + t.second.to_hex(); });
    write_relation(dir, "load_data", db.load_data, single);
    write_relation(dir, "restricted_inst", db.restricted_inst, single);
    write_relation(dir, "selfdestruct", db.selfdestruct, single);
}

ExtractionResult extract_facts(const ExecutionTrace& trace, const ExtractOptions& options)
{
    ExtractionResult r = Replayer(trace, options).run();
    r.facts.seal();
    return r;
}

std::optional<uint32_t> mask_width(const Word& mask) noexcept
{
    for (const uint32_t width : kIntegerWidths)
    {
        Word m;
        for (uint32_t bit = 0; bit < width; bit += 64)
        {
            const uint32_t rem = width - bit;
            m.limb[bit / 64] = rem >= 64 ? ~uint64_t{0} : (uint64_t{1} << rem) - 1;
        }
        if (m == mask)
            return width;
    }
    return std::nullopt;
}

ArithmeticOutcome evaluate_arithmetic(
    Opcode op, const Word& lhs, const Word& rhs, const Word& result, uint32_t width, bool is_signed)
{
    const BigInt a = reinterpret(lhs.to_bigint(), width, is_signed);
    const BigInt b = reinterpret(rhs.to_bigint(), width, is_signed);
    ArithmeticOutcome o;
    o.width = width;
    o.is_signed = is_signed;
    o.actual = reinterpret(result.to_bigint(), width, is_signed);
    switch (op)
    {
    case Opcode::ADD:
        o.expected = a + b;
        break;
    case Opcode::SUB:
        o.expected = a - b;
        break;
    case Opcode::MUL:
        o.expected = a * b;
        break;
    case Opcode::DIV:
        o.expected = b == 0 ? BigInt{0} : BigInt{a / b};
        break;
    case Opcode::EXP:
        o.expected = saturating_pow(a, reinterpret(rhs.to_bigint(), width, false));
        break;
    default:
        throw std::invalid_argument("not an arithmetic opcode: " + std::string(name(op)));
    }
    return o;
}

std::pair<uint32_t, bool> operation_type(const InferredTypes& types, ValueId lhs, ValueId rhs)
{
    const uint32_t width = std::max(types.size_of(lhs), types.size_of(rhs));
    return {width == 0 ? 256 : width, types.signed_(lhs) || types.signed_(rhs)};
}

void compute_arithmetic_expectations(ExtractionResult& result, const InferredTypes& types)
{
    for (const ArithmeticSite& a : result.arithmetic)
    {
        const auto [width, is_signed] = operation_type(types, a.lhs, a.rhs);
        auto o = evaluate_arithmetic(a.op, a.lhs_word, a.rhs_word, a.result_word, width, is_signed);
        result.facts.expected_result.insert({a.result, std::move(o.expected)});
        result.facts.actual_result.insert({a.result, std::move(o.actual)});
    }
}

}  // namespace tracescan
