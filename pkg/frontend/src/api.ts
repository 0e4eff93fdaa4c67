export type Choice = 'AB' | 'AC' | 'BC'

export interface Task {
  task_id: string
  items: [string, string, string]
  image_urls: [string, string, string]
}

export type SubmitResult = 'ok' | 'conflict'

export interface ApiClient {
  fetchTask(worker: string): Promise<Task>
  /** Resolves 'ok' on 200, 'conflict' on 409; rejects on transport errors. */
  submitAnswer(body: { task_id: string; worker: string; choice: Choice }): Promise<SubmitResult>
}

export class HttpApiClient implements ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  async fetchTask(worker: string): Promise<Task> {
    const resp = await fetch(
      `${this.baseUrl}/api/task?worker=${encodeURIComponent(worker)}`,
    )
    if (!resp.ok) {
      throw new Error(`task request failed with ${resp.status}`)
    }
    return (await resp.json()) as Task
  }

  async submitAnswer(body: {
    task_id: string
    worker: string
    choice: Choice
  }): Promise<SubmitResult> {
    const resp = await fetch(`${this.baseUrl}/api/answer`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    if (resp.status === 200) return 'ok'
    if (resp.status === 409) return 'conflict'
    throw new Error(`answer rejected with ${resp.status}`)
  }
}
