import { describe, expect, it } from 'vitest';

import { buildProgram } from '../src/program';

describe('buildProgram', () => {
    it('filters every probe by the target pid', () => {
        const program = buildProgram(4242);
        const predicates = program.match(/\/pid == 4242\//g) ?? [];
        expect(predicates.length).toBe(4); // openat enter/exit, read, close
    });

    it('traces openat entry and exit, read, and close', () => {
        const program = buildProgram(1);
        expect(program).toContain('tracepoint:syscalls:sys_enter_openat');
        expect(program).toContain('tracepoint:syscalls:sys_exit_openat');
        expect(program).toContain('tracepoint:syscalls:sys_enter_read');
        expect(program).toContain('tracepoint:syscalls:sys_enter_close');
    });

    it('emits the raw record formats the parser expects', () => {
        const program = buildProgram(1);
        expect(program).toContain('printf("OPEN\\t%llu\\t%u\\t%d\\t%s\\n"');
        expect(program).toContain('printf("READ\\t%llu\\t%u\\t%d\\n"');
        expect(program).toContain('printf("CLOSE\\t%llu\\t%u\\t%d\\n"');
    });

    it('cleans up its map at detach', () => {
        expect(buildProgram(1)).toContain('END { clear(@fn); }');
    });

    it('rejects bad pids', () => {
        expect(() => buildProgram(0)).toThrow();
        expect(() => buildProgram(1.5)).toThrow();
    });
});
