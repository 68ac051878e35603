import { describe, expect, it } from 'vitest';

import { parseRawLine } from '../src/rawparse';

describe('parseRawLine', () => {
    it('parses OPEN records', () => {
        expect(parseRawLine('OPEN\t123\t42\t7\t/srv/docs/doc1')).toEqual({
            kind: 'open',
            tsNs: 123n,
            pid: 42,
            fd: 7,
            rawPath: '/srv/docs/doc1',
        });
    });

    it('keeps tabs inside the path field', () => {
        const record = parseRawLine('OPEN\t1\t2\t3\t/weird\tname');
        expect(record).not.toBeNull();
        expect((record as any).rawPath).toBe('/weird\tname');
    });

    it('parses failed opens with negative return values', () => {
        const record = parseRawLine('OPEN\t1\t2\t-2\t/missing');
        expect((record as any).fd).toBe(-2);
    });

    it('parses READ and CLOSE records', () => {
        expect(parseRawLine('READ\t99\t42\t7')).toEqual({
            kind: 'read',
            tsNs: 99n,
            pid: 42,
            fd: 7,
        });
        expect(parseRawLine('CLOSE\t100\t42\t7')).toEqual({
            kind: 'close',
            tsNs: 100n,
            pid: 42,
            fd: 7,
        });
    });

    it('handles 64-bit timestamps', () => {
        const record = parseRawLine('READ\t18446744073709551615\t1\t2');
        expect((record as any).tsNs).toBe(18446744073709551615n);
    });

    it('ignores tracer banners and malformed lines', () => {
        expect(parseRawLine('Attaching 5 probes...')).toBeNull();
        expect(parseRawLine('')).toBeNull();
        expect(parseRawLine('OPEN\tnotanumber\t1\t2\t/x')).toBeNull();
        expect(parseRawLine('READ\t1\t2')).toBeNull();
        expect(parseRawLine('@fn[123]: /leftover')).toBeNull();
    });
});
