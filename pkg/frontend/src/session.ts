import type { ApiClient, Choice, Task } from './api.js'

export type SessionState = 'idle' | 'loading' | 'ready' | 'submitting' | 'error'

export type SubmitOutcome = 'ok' | 'conflict' | 'retry' | 'ignored'

export interface AnswerRecord {
  taskId: string
  /** Item ids of the two clicked images, in task order. */
  pair: [string, string]
  remainder: string
  choice: Choice
}

/** Maps a sorted pair of task-order slots to the wire choice. */
const SLOT_CHOICE: Record<string, Choice> = {
  '0,1': 'AB',
  '0,2': 'AC',
  '1,2': 'BC',
}

/**
 * One annotator's run of tasks. Image positions are shuffled among the
 * triangle vertices per task to cancel position bias; the shuffle is
 * undone when a clicked edge is translated back to a task-order choice,
 * so the stored answer always names the two images actually clicked.
 * At most one submission is in flight, and a task can be answered once.
 */
export class AnnotationSession {
  state: SessionState = 'idle'
  task: Task | null = null
  /** Display position -> task slot (0=A, 1=B, 2=C). */
  perm: [number, number, number] = [0, 1, 2]
  answered = 0
  history: AnswerRecord[] = []
  lastError: string | null = null

  constructor(
    private readonly api: ApiClient,
    readonly worker: string,
    private readonly rng: () => number = Math.random,
  ) {}

  async next(): Promise<void> {
    this.state = 'loading'
    this.task = null
    try {
      const task = await this.api.fetchTask(this.worker)
      this.task = task
      this.perm = shuffled(this.rng)
      this.state = 'ready'
      this.lastError = null
    } catch (err) {
      this.state = 'error'
      this.lastError = `could not fetch task: ${String(err)}`
    }
  }

  /** Image URL shown at each triangle vertex. */
  displayImageUrls(): [string, string, string] {
    if (!this.task) throw new Error('no task on screen')
    return this.perm.map((slot) => this.task!.image_urls[slot]) as [string, string, string]
  }

  /** Wire choice for an edge between two display positions. */
  choiceForEdge(edge: readonly [number, number]): Choice {
    const slots = [this.perm[edge[0]], this.perm[edge[1]]].sort((a, b) => a - b)
    return SLOT_CHOICE[slots.join(',')]
  }

  async submitEdge(edge: readonly [number, number]): Promise<SubmitOutcome> {
    if (this.state !== 'ready' && this.state !== 'error') return 'ignored'
    const task = this.task
    if (!task) return 'ignored'
    const choice = this.choiceForEdge(edge)
    this.state = 'submitting'
    let result
    try {
      result = await this.api.submitAnswer({
        task_id: task.task_id,
        worker: this.worker,
        choice,
      })
    } catch (err) {
      // transport failure: keep the task so the same answer can be retried
      this.state = 'error'
      this.lastError = `submit failed, retry: ${String(err)}`
      return 'retry'
    }
    if (result === 'ok') {
      const slots = [this.perm[edge[0]], this.perm[edge[1]]].sort((a, b) => a - b)
      const remainder = 3 - slots[0] - slots[1]
      this.history.push({
        taskId: task.task_id,
        pair: [task.items[slots[0]], task.items[slots[1]]],
        remainder: task.items[remainder],
        choice,
      })
      this.answered += 1
      await this.next()
      return 'ok'
    }
    // stale/consumed task: drop it and show a fresh one, counter untouched
    await this.next()
    return 'conflict'
  }
}

function shuffled(rng: () => number): [number, number, number] {
  const perm: [number, number, number] = [0, 1, 2]
  for (let i = perm.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1))
    ;[perm[i], perm[j]] = [perm[j], perm[i]]
  }
  return perm
}
