/** Generation of the kernel-side tracing program. */

/**
 * bpftrace program tracing file opens and reads of one process.
 *
 * openat is captured at entry (pathname argument) and exit (returned fd) so
 * userspace can maintain an fd -> path table; read/close are captured by fd.
 * Fields are tab-separated with the path last, so paths containing spaces
 * survive.
 */
export function buildProgram(targetPid: number): string {
    if (!Number.isInteger(targetPid) || targetPid <= 0) {
        throw new Error(`target pid must be a positive integer, got ${targetPid}`);
    }
    return [
        `tracepoint:syscalls:sys_enter_openat /pid == ${targetPid}/`,
        `{ @fn[tid] = str(args->filename); }`,
        ``,
        `tracepoint:syscalls:sys_exit_openat /pid == ${targetPid}/`,
        `{`,
        `    if (@fn[tid] != "") {`,
        `        printf("OPEN\\t%llu\\t%u\\t%d\\t%s\\n", nsecs, pid, args->ret, @fn[tid]);`,
        `        delete(@fn[tid]);`,
        `    }`,
        `}`,
        ``,
        `tracepoint:syscalls:sys_enter_read /pid == ${targetPid}/`,
        `{ printf("READ\\t%llu\\t%u\\t%d\\n", nsecs, pid, args->fd); }`,
        ``,
        `tracepoint:syscalls:sys_enter_close /pid == ${targetPid}/`,
        `{ printf("CLOSE\\t%llu\\t%u\\t%d\\n", nsecs, pid, args->fd); }`,
        ``,
        `END { clear(@fn); }`,
    ].join('\n');
}
