/** Userspace fd -> path tracking for read-event attribution. */

import * as path from 'path';

/**
 * Resolve a pathname argument as the kernel would: absolute paths stand,
 * relative ones are joined to the traced process's working directory
 * (captured once at attach time).
 */
export function resolvePath(cwd: string, rawPath: string): string {
    return path.normalize(path.isAbsolute(rawPath) ? rawPath : path.join(cwd, rawPath));
}

export class FdTable {
    private readonly paths = new Map<number, string>();

    open(fd: number, resolvedPath: string): void {
        if (fd >= 0) this.paths.set(fd, resolvedPath);
    }

    lookup(fd: number): string | undefined {
        return this.paths.get(fd);
    }

    close(fd: number): void {
        this.paths.delete(fd);
    }

    get size(): number {
        return this.paths.size;
    }
}
