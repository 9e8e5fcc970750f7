/**
 * Error taxonomy mirrored from the synthesizer's exit codes so callers can
 * catch the same classes of failure they would see in-process.
 */

export class DpSynthError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** Exit code 2: schema, domain, or argument problems. */
export class ValidationError extends DpSynthError {}

/** Exit code 3: DP budget missing or exhausted. */
export class BudgetError extends DpSynthError {}

/** Exit code 4: a generation condition has zero probability. */
export class InfeasibleConditionError extends DpSynthError {}

/** The CLI binary could not be spawned at all. */
export class CliNotFoundError extends DpSynthError {}

export function errorForExit(code: number, stderr: string): DpSynthError {
  const message = stderr.trim() || `synthesizer CLI failed with exit code ${code}`;
  switch (code) {
    case 2:
      return new ValidationError(message);
    case 3:
      return new BudgetError(message);
    case 4:
      return new InfeasibleConditionError(message);
    default:
      return new DpSynthError(message);
  }
}
