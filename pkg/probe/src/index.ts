export { ProbeEvent, FileOp, formatEventLine } from './events';
export { buildProgram } from './program';
export { parseRawLine, RawRecord, OpenRecord, FdRecord } from './rawparse';
export { FdTable, resolvePath } from './fdtable';
export { EventPipeline, PipelineOptions, PipelineStats } from './pipeline';
export { parseArgs, ProbeConfig, UsageError, USAGE } from './cli';
export { runProbe, ProbeResult } from './probe';
